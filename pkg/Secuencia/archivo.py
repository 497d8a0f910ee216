"""
Archivo de log de solo-anexado.

`log.bin` es una secuencia de registros `[largo u32][crc32 u32][entrada]`,
todo little-endian. `batches.idx` guarda registros fijos
`[numero u32][inicio u64][fin u64]` con el rango de cada batch sellado.

Al reabrir, un registro final incompleto (escritura cortada) se trunca si su
posición aún no estaba sellada; un registro corrupto en medio del archivo o
dentro de un batch sellado es un error.
"""
import os
import struct
import zlib
from pathlib import Path

from Comun.errores import CorruptLog
from Comun.logs import get_logger

logger = get_logger(__name__)

HEADER = struct.Struct('<II')
BATCH = struct.Struct('<IQQ')


class LogFile:

    def __init__(self, location):
        self.dir = Path(location)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.log_path = self.dir / 'log.bin'
        self.batch_path = self.dir / 'batches.idx'
        self.log_path.touch(exist_ok=True)
        self.batch_path.touch(exist_ok=True)

    def cargar(self):
        """
        Lee todos los registros y batches, truncando colas cortadas
        Returns: (list[bytes], list[tuple[int, int, int]])
        """
        batches = self._leer_batches()
        sellados = max((fin for _, _, fin in batches), default=0)
        registros = self._leer_registros(sellados)
        return registros, batches

    def append(self, payload):
        with open(self.log_path, 'ab') as f:
            f.write(HEADER.pack(len(payload), zlib.crc32(payload)) + payload)
            f.flush()
            os.fsync(f.fileno())

    def append_batch(self, numero, inicio, fin):
        with open(self.batch_path, 'ab') as f:
            f.write(BATCH.pack(numero, inicio, fin))
            f.flush()
            os.fsync(f.fileno())

    def _leer_registros(self, sellados=0):
        datos = self.log_path.read_bytes()
        registros = []
        pos = 0
        while pos < len(datos):
            if pos + HEADER.size > len(datos):
                self._truncar_cola(pos, len(registros) + 1, sellados, 'cabecera incompleta')
                break
            largo, crc = HEADER.unpack_from(datos, pos)
            fin = pos + HEADER.size + largo
            if fin > len(datos):
                self._truncar_cola(pos, len(registros) + 1, sellados, 'registro incompleto')
                break
            payload = datos[pos + HEADER.size:fin]
            if zlib.crc32(payload) != crc:
                if fin == len(datos):
                    self._truncar_cola(pos, len(registros) + 1, sellados, 'crc inválido en el último registro')
                    break
                raise CorruptLog(f"Registro corrupto en el byte {pos} de {self.log_path}")
            registros.append(payload)
            pos = fin
        return registros

    def _truncar_cola(self, pos, posicion, sellados, motivo):
        # Solo la cola sin sellar puede quedar cortada: cada registro se
        # sincroniza antes de que su batch se selle.
        if posicion <= sellados:
            raise CorruptLog(
                f"Registro {posicion} dañado en el byte {pos} de {self.log_path}, "
                f"dentro de un batch sellado (frontera {sellados})"
            )
        self._truncar(self.log_path, pos, motivo)

    def _leer_batches(self):
        datos = self.batch_path.read_bytes()
        completos = len(datos) // BATCH.size
        if len(datos) % BATCH.size:
            self._truncar(self.batch_path, completos * BATCH.size, 'índice de batch incompleto')
        return [BATCH.unpack_from(datos, i * BATCH.size) for i in range(completos)]

    @staticmethod
    def _truncar(path, largo, motivo):
        logger.warning("Truncando %s en %d bytes: %s", path, largo, motivo)
        with open(path, 'r+b') as f:
            f.truncate(largo)

"""
Asignador dentro del propio espacio.

Toda su metadata vive en la cabecera de la región (offset 0): magic, frontera
de bump y una cabeza de lista libre por clase de tamaño. Cada bloque lleva una
cabecera de 8 bytes `[tamaño u32][estado u32]` justo antes del payload. Dos
réplicas que ejecutan la misma secuencia de alloc/free obtienen las mismas
direcciones y la misma imagen.
"""
import struct

from Comun.errores import BadFree, OutOfMemory

MAGIC = 0x434F4C41  # 'ALOC'
LIVE = 0x4556494C  # 'LIVE'
FREE = 0x45455246  # 'FREE'

NUM_CLASES = 20
CLASE_GRANDE = NUM_CLASES - 1
TAM_MINIMO = 16
HEAP_OFFSET = 0x1000

CABECERA = struct.Struct(f'<II{NUM_CLASES}I')
BLOQUE = struct.Struct('<II')


def clase_para(size):
    """
    Clase de tamaño y tamaño de bloque para un pedido de `size` bytes
    Returns: (int, int) - (clase, tamaño del bloque)
    """
    for clase in range(CLASE_GRANDE):
        tam = TAM_MINIMO << clase
        if size <= tam:
            return clase, tam
    return CLASE_GRANDE, (size + 15) & ~15


def _es_potencia_de_dos(n):
    return n > 0 and n & (n - 1) == 0


class Allocator:

    def __init__(self, space, region):
        self.space = space
        self.region = region
        self.base = region.start
        self.heap_start = region.start + HEAP_OFFSET

    def inicializar(self):
        self._escribir_cabecera(self.heap_start, [0] * NUM_CLASES)

    # ---------------- cabecera ----------------

    def _leer_cabecera(self):
        campos = CABECERA.unpack(self.space.read(self.base, CABECERA.size))
        return campos[1], list(campos[2:])

    def _escribir_cabecera(self, frontera, cabezas):
        self.space.write(self.base, CABECERA.pack(MAGIC, frontera, *cabezas))

    def _escribir_cabeza(self, clase, addr):
        self.space.write(self.base + 8 + 4 * clase, struct.pack('<I', addr))

    def _escribir_frontera(self, frontera):
        self.space.write(self.base + 4, struct.pack('<I', frontera))

    def _bloque(self, addr):
        return BLOQUE.unpack(self.space.read(addr - BLOQUE.size, BLOQUE.size))

    def _es_bloque(self, addr):
        """
        Recorre los bloques desde el inicio del heap: `addr` debe ser el
        payload de alguno, no un punto interior
        """
        cursor = self.heap_start
        while cursor + BLOQUE.size <= addr:
            tam_bloque, _estado = BLOQUE.unpack(self.space.read(cursor, BLOQUE.size))
            if tam_bloque == 0:
                # relleno de alineación, siempre en cero
                cursor += BLOQUE.size
                continue
            payload = cursor + BLOQUE.size
            if payload == addr:
                return True
            cursor = payload + tam_bloque
        return False

    def _siguiente(self, addr):
        return struct.unpack('<I', self.space.read(addr, 4))[0]

    @property
    def frontier(self):
        return self._leer_cabecera()[0]

    # ---------------- operaciones ----------------

    def alloc(self, size, align=8):
        if not isinstance(size, int) or size <= 0:
            raise ValueError(f"size debe ser > 0, se recibió {size!r}")
        if not _es_potencia_de_dos(align):
            raise ValueError(f"align debe ser potencia de dos, se recibió {align!r}")

        clase, tam = clase_para(size)
        frontera, cabezas = self._leer_cabecera()

        # Primero la lista libre de la clase (primer ajuste, orden de lista)
        previo = 0
        actual = cabezas[clase]
        while actual:
            tam_bloque, _estado = self._bloque(actual)
            siguiente = self._siguiente(actual)
            if actual % align == 0 and tam_bloque >= tam:
                if previo:
                    self.space.write(previo, struct.pack('<I', siguiente))
                else:
                    self._escribir_cabeza(clase, siguiente)
                self.space.write(actual - BLOQUE.size, BLOQUE.pack(tam_bloque, LIVE))
                self.space.write(actual, bytes(tam_bloque))
                return actual
            previo, actual = actual, siguiente

        # Bump: la memoria más allá de la frontera siempre está en cero
        alineacion = max(align, 8)
        payload = (frontera + BLOQUE.size + alineacion - 1) & ~(alineacion - 1)
        fin = payload + tam
        if fin - 1 > self.region.end:
            raise OutOfMemory(
                f"Región {self.region.name} agotada: se pidieron {size} bytes"
            )
        self.space.write(payload - BLOQUE.size, BLOQUE.pack(tam, LIVE))
        self._escribir_frontera(fin)
        return payload

    def free(self, addr):
        frontera, cabezas = self._leer_cabecera()
        if not (self.heap_start + BLOQUE.size <= addr < frontera) or addr % 8 or not self._es_bloque(addr):
            raise BadFree(f"{addr:#x} no es un bloque vivo de la región {self.region.name}")
        tam_bloque, estado = self._bloque(addr)
        if estado != LIVE:
            raise BadFree(f"{addr:#x} no es un bloque vivo de la región {self.region.name}")
        clase = clase_para(tam_bloque)[0]
        self.space.write(addr - BLOQUE.size, BLOQUE.pack(tam_bloque, FREE))
        self.space.write(addr, struct.pack('<I', cabezas[clase]))
        self._escribir_cabeza(clase, addr)

    def block_size(self, addr):
        tam_bloque, estado = self._bloque(addr)
        if estado != LIVE:
            raise BadFree(f"{addr:#x} no es un bloque vivo")
        return tam_bloque

"""
Secuenciador global (FCO): fija el orden total de todas las intenciones de
llamada antes de que nadie ejecute nada.

El secuenciador nunca lee ni escribe estado de servicios; solo conoce los
identificadores desplegados para rechazar intenciones hacia servicios que no
existen.
"""
from dataclasses import dataclass, field

from Comun import config
from Comun.errores import CorruptLog, GasLimitExceeded, InvalidIntent, UnknownService, UnsealedRange
from Comun.logs import get_logger
from Lyquid.valor import Address, decode, encode
from Secuencia.archivo import LogFile

logger = get_logger(__name__)


@dataclass(frozen=True)
class CallIntent:
    caller: Address
    target: str
    method: str
    args: tuple = ()
    gas_limit: int = field(default_factory=lambda: config.DEFAULT_GAS)

    def to_value(self):
        return [self.caller, self.target, self.method, list(self.args), self.gas_limit]


@dataclass(frozen=True)
class LogEntry:
    position: int
    intent: CallIntent
    batch: int

    @property
    def target(self):
        return self.intent.target

    def encode(self):
        return encode([self.position, self.batch] + self.intent.to_value())

    @classmethod
    def decode(cls, datos):
        position, batch, caller, target, method, args, gas_limit = decode(datos)
        return cls(position, CallIntent(caller, target, method, tuple(args), gas_limit), batch)


@dataclass(frozen=True)
class Batch:
    number: int
    start: int
    end: int
    sealed: bool = True

    @property
    def range(self):
        return (self.start, self.end)

    def __len__(self):
        return max(0, self.end - self.start + 1)


def verificar_intent(intent, servicios, max_gas):
    """
    Verifica los invariantes de CallIntent y que el destino exista
    Returns: (bool, Exception) - (éxito, error a lanzar)
    """
    if not isinstance(intent.method, str) or not intent.method:
        return False, InvalidIntent("El método de la intención no puede ser vacío")
    if not isinstance(intent.caller, Address):
        return False, InvalidIntent(f"Caller inválido: {intent.caller!r}")
    if not isinstance(intent.gas_limit, int) or intent.gas_limit < 0:
        return False, InvalidIntent(f"gas_limit inválido: {intent.gas_limit!r}")
    if intent.gas_limit > max_gas:
        return False, GasLimitExceeded(
            f"gas_limit {intent.gas_limit} supera el máximo global {max_gas}"
        )
    if intent.target not in servicios:
        return False, UnknownService(f"El servicio '{intent.target}' no está desplegado")
    return True, None


class Sequencer:
    """
    Anexado de un solo escritor; lectores concurrentes solo sobre batches sellados.
    """

    def __init__(self, location=None, max_gas=None):
        self.max_gas = max_gas if max_gas is not None else config.MAX_GAS
        self._servicios = set()
        self._registros = []
        self._batches = []
        self._archivo = LogFile(location) if location is not None else None
        if self._archivo is not None:
            self._recuperar()

    def _recuperar(self):
        registros, batches = self._archivo.cargar()
        self._registros = list(registros)
        self._batches = [Batch(numero, inicio, fin) for numero, inicio, fin in batches]
        if self.sealed_frontier > len(self._registros):
            raise CorruptLog(
                f"El índice de batches sella hasta {self.sealed_frontier} pero el log tiene "
                f"{len(self._registros)} entradas"
            )
        logger.info("Log recuperado: %d entradas, %d batches", len(self._registros), len(self._batches))

    # ---------------- servicios ----------------

    def register_service(self, service):
        self._servicios.add(service)

    @property
    def deployed_services(self):
        return frozenset(self._servicios)

    # ---------------- escritura ----------------

    @property
    def open_batch_number(self):
        return len(self._batches) + 1

    @property
    def sealed_frontier(self):
        return self._batches[-1].end if self._batches else 0

    @property
    def last_position(self):
        return len(self._registros)

    def submit(self, intent):
        """
        Anexa la intención en la siguiente posición del batch abierto
        """
        exito, error = verificar_intent(intent, self._servicios, self.max_gas)
        if not exito:
            raise error

        entry = LogEntry(len(self._registros) + 1, intent, self.open_batch_number)
        payload = entry.encode()
        if self._archivo is not None:
            self._archivo.append(payload)
        self._registros.append(payload)
        logger.debug("submit %d -> %s.%s", entry.position, intent.target, intent.method)
        return entry.position

    def seal_batch(self):
        """
        Sella el batch abierto (puede estar vacío) y abre el siguiente
        """
        batch = Batch(self.open_batch_number, self.sealed_frontier + 1, len(self._registros))
        if self._archivo is not None:
            self._archivo.append_batch(batch.number, batch.start, batch.end)
        self._batches.append(batch)
        logger.debug("seal batch %d rango [%d, %d]", batch.number, batch.start, batch.end)
        return batch

    # ---------------- lectura ----------------

    @property
    def batches(self):
        return list(self._batches)

    def batch_of(self, position):
        for batch in self._batches:
            if batch.start <= position <= batch.end:
                return batch
        raise UnsealedRange(f"La posición {position} no está sellada")

    def _verificar_rango(self, start, end):
        if start < 1 or end > self.sealed_frontier:
            raise UnsealedRange(
                f"Rango [{start}, {end}] fuera de la frontera sellada {self.sealed_frontier}"
            )

    def read(self, start, end):
        """
        Entradas [start, end] en orden ascendente; solo rangos sellados
        """
        if end < start:
            return []
        self._verificar_rango(start, end)
        return [LogEntry.decode(self._registros[p - 1]) for p in range(start, end + 1)]

    def read_bytes(self, position):
        self._verificar_rango(position, position)
        return self._registros[position - 1]

    def subsequence(self, targets, start, end):
        """
        Entradas cuyo destino de primer nivel está en `targets`
        """
        if end < start:
            return []
        self._verificar_rango(start, end)
        targets = set(targets)
        return [entry for entry in self.read(start, end) if entry.intent.target in targets]

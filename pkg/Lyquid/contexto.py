"""
Contexto de llamada (`ctx`), medidor de gas y efectos.

El contexto de red solo expone caller, servicio, posición, gas y las raíces
de red: no hay reloj, azar, identidad de nodo ni estado de instancia.
"""
import json
from dataclasses import dataclass

from Comun.errores import GasExhausted, MethodError
from Lyquid.valor import U256_MAX, Address, valor_a_json

GAS_CALL = 100
GAS_ARITH = 1

EFFECT_KINDS = ('inner-call', 'event', 'state-write-summary')


class GasMeter:
    """
    Contador de pasos; se cobra antes de ejecutar la operación.
    El agotamiento queda registrado aunque el método capture la excepción.
    """

    __slots__ = ('limit', 'used', 'agotado')

    def __init__(self, limit):
        self.limit = limit
        self.used = 0
        self.agotado = None

    @property
    def remaining(self):
        return self.limit - self.used

    def charge(self, amount):
        if self.used + amount > self.limit:
            self.used = self.limit
            self.agotado = self.agotado or GasExhausted(f"Gas agotado (límite {self.limit})")
            raise self.agotado
        self.used += amount

    @classmethod
    def unbounded(cls):
        return cls(1 << 255)


@dataclass
class Effect:
    kind: str
    position: int
    source: str
    target: str
    method: str
    args: tuple = ()
    result: object = None
    index: int = None
    parent: int = None
    span: int = 0
    gas: int = 0
    error: str = None

    def to_dict(self):
        return {
            'kind': self.kind,
            'position': self.position,
            'source': self.source,
            'target': self.target,
            'method': self.method,
            'args': valor_a_json(list(self.args)),
            'result': None if self.result is None else valor_a_json(self.result),
            'index': self.index,
            'parent': self.parent,
            'span': self.span,
            'gas': self.gas,
            'error': self.error,
        }


def effects_to_lines(effects):
    """Traza de efectos: un JSON por línea, claves en orden estable."""
    return ''.join(json.dumps(e.to_dict(), sort_keys=True) + '\n' for e in effects)


class _Aritmetica:
    """Operaciones U256 con cobro de gas; desbordes son MethodError."""

    __slots__ = ()

    def tick(self, steps=1):
        self._cobrar(GAS_ARITH * steps)

    def add(self, a, b):
        self.tick()
        if a + b > U256_MAX:
            raise MethodError('overflow', f"{a} + {b} desborda U256")
        return a + b

    def sub(self, a, b):
        self.tick()
        if b > a:
            raise MethodError('underflow', f"{a} - {b} es negativo")
        return a - b

    def mul(self, a, b):
        self.tick()
        if a * b > U256_MAX:
            raise MethodError('overflow', f"{a} * {b} desborda U256")
        return a * b

    def div(self, a, b):
        self.tick()
        if b == 0:
            raise MethodError('division-by-zero', "División por cero")
        return a // b

    def require(self, condicion, code, message=None):
        self.tick()
        if not condicion:
            raise MethodError(code, message)


class NetworkContext(_Aritmetica):

    __slots__ = ('caller', 'service', 'position', 'network', '_ejecucion', '_index')

    def __init__(self, caller, service, position, network, ejecucion, index):
        self.caller = caller
        self.service = service
        self.position = position
        self.network = network
        self._ejecucion = ejecucion
        self._index = index

    def _cobrar(self, amount):
        self._ejecucion.meter.charge(amount)

    @property
    def address(self):
        return Address.for_service(self.service)

    def call(self, target, method, *args):
        """Llamada a otro servicio en la misma posición."""
        return self._ejecucion.runtime.inner_call(self, target, method, args)

    def emit(self, name, value):
        self._ejecucion.emit(self, name, value)


class InstanceContext(_Aritmetica):

    __slots__ = ('caller', 'service', 'node_id', 'network', 'instance', 'upc', 'meter')

    def __init__(self, caller, service, node_id, network, instance, upc, meter):
        self.caller = caller
        self.service = service
        self.node_id = node_id
        self.network = network
        self.instance = instance
        self.upc = upc
        self.meter = meter

    def _cobrar(self, amount):
        self.meter.charge(amount)

"""
Descripción de una llamada UPC: selección de nodos, agregación, quórum y plazo.
"""
from collections import Counter
from dataclasses import dataclass, field

from jsonschema import validate

from Lyquid.valor import digest, encode, json_a_valor

SELECTORS = ('all', 'first_k', 'filtered', 'listed')
AGGREGATORS = ('first_valid', 'threshold_shares', 'collect_all', 'single_node')

# Faltas posibles de una respuesta
TIMEOUT = 'timeout'
INVALID = 'invalid'
ERROR = 'error'


# ==================== REDUCTORES ====================

def _mediana(payloads):
    ordenados = sorted(payloads)
    return ordenados[(len(ordenados) - 1) // 2]


def _mayoria(payloads):
    cuentas = Counter(encode(p) for p in payloads)
    mayor = max(cuentas.values())
    ganador = min(k for k, v in cuentas.items() if v == mayor)
    return next(p for p in payloads if encode(p) == ganador)


def _concatenar(payloads):
    salida = []
    for p in payloads:
        salida.extend(p if isinstance(p, list) else [p])
    return salida


REDUCERS = {
    'sum': sum,
    'min': min,
    'max': max,
    'median': _mediana,
    'majority': _mayoria,
    'concat': _concatenar,
}


# ==================== SELECCIÓN ====================

@dataclass(frozen=True)
class Selector:
    kind: str = 'all'
    k: int = None
    root: str = None
    nodes: tuple = ()

    def __post_init__(self):
        if self.kind not in SELECTORS:
            raise ValueError(f"Selector desconocido: {self.kind}")
        if self.kind == 'first_k' and (self.k is None or self.k < 1):
            raise ValueError("first_k necesita k >= 1")
        if self.kind == 'filtered' and not self.root:
            raise ValueError("filtered necesita el nombre de la raíz de miembros")

    def select(self, candidatos, leer_raiz):
        """
        Nodos elegidos, en orden de id, a partir de los que alojan el servicio
        """
        candidatos = sorted(candidatos)
        if self.kind == 'all':
            return candidatos
        if self.kind == 'first_k':
            return candidatos[:self.k]
        if self.kind == 'listed':
            return [n for n in candidatos if n in set(self.nodes)]
        miembros = set(leer_raiz(self.root))
        return [n for n in candidatos if n in miembros]


# ==================== AGREGACIÓN ====================

@dataclass(frozen=True)
class Aggregator:
    kind: str = 'first_valid'
    reducer: str = None
    k: int = None
    expected_digest: str = None

    def __post_init__(self):
        if self.kind not in AGGREGATORS:
            raise ValueError(f"Agregador desconocido: {self.kind}")
        if self.kind in ('threshold_shares', 'collect_all') and self.reducer not in REDUCERS:
            raise ValueError(f"{self.kind} necesita un reductor de {sorted(REDUCERS)}")
        if self.kind == 'threshold_shares' and (self.k is None or self.k < 1):
            raise ValueError("threshold_shares necesita k >= 1")

    def validate(self, payload):
        """Bien formado y, si se indicó, con el digest esperado."""
        try:
            encode(payload)
        except ValueError:
            return False
        return self.expected_digest is None or digest(payload) == self.expected_digest

    def needed(self, quorum):
        if self.kind == 'threshold_shares':
            return max(self.k, quorum)
        return quorum

    def satisfied(self, validas, respondidas, seleccionados, quorum):
        if self.kind == 'collect_all':
            return respondidas >= seleccionados and len(validas) >= quorum
        return len(validas) >= self.needed(quorum)

    def aggregate(self, validas):
        """
        Resultado a partir de las respuestas válidas en orden de llegada
        """
        if self.kind in ('first_valid', 'single_node'):
            return validas[0].payload
        if self.kind == 'threshold_shares':
            return REDUCERS[self.reducer]([r.payload for r in validas[:self.k]])
        return REDUCERS[self.reducer]([r.payload for r in sorted(validas, key=lambda r: r.node)])


# ==================== LLAMADA Y RESPUESTA ====================

@dataclass(frozen=True)
class UpcCall:
    service: str
    handler: str
    args: tuple = ()
    selector: Selector = field(default_factory=Selector)
    aggregator: Aggregator = field(default_factory=Aggregator)
    quorum: int = 1
    deadline: int = 10
    quorum_root: str = None

    def __post_init__(self):
        if self.quorum < 1:
            raise ValueError(f"quorum debe ser >= 1, se recibió {self.quorum}")
        if self.deadline <= 0:
            raise ValueError(f"deadline debe ser > 0, se recibió {self.deadline}")

    @classmethod
    def from_dict(cls, datos):
        """
        Construye la llamada desde su forma JSON validada
        """
        validate(instance=datos, schema=UPC_CALL_SCHEMA)
        selector = datos.get('selector', {})
        aggregator = datos.get('aggregator', {})
        return cls(
            service=datos['service'],
            handler=datos['handler'],
            args=tuple(json_a_valor(a) for a in datos.get('args', [])),
            selector=Selector(
                selector.get('kind', 'all'), selector.get('k'), selector.get('root'),
                tuple(selector.get('nodes', [])),
            ),
            aggregator=Aggregator(
                aggregator.get('kind', 'first_valid'), aggregator.get('reducer'),
                aggregator.get('k'), aggregator.get('expected_digest'),
            ),
            quorum=datos.get('quorum', 1),
            deadline=datos.get('deadline', 10),
            quorum_root=datos.get('quorum_root'),
        )


@dataclass(frozen=True)
class UpcResponse:
    node: int
    payload: object = None
    fault: str = None
    code: str = None
    message: str = None

    @property
    def valid(self):
        return self.fault is None


UPC_CALL_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "UpcCall",
    "type": "object",
    "properties": {
        "service": {"type": "string", "minLength": 1},
        "handler": {"type": "string", "minLength": 1},
        "args": {"type": "array"},
        "selector": {
            "type": "object",
            "properties": {
                "kind": {"type": "string", "enum": list(SELECTORS)},
                "k": {"type": "integer", "minimum": 1},
                "root": {"type": "string"},
                "nodes": {"type": "array", "items": {"type": "integer", "minimum": 1}}
            },
            "additionalProperties": False
        },
        "aggregator": {
            "type": "object",
            "properties": {
                "kind": {"type": "string", "enum": list(AGGREGATORS)},
                "reducer": {"type": "string", "enum": list(REDUCERS)},
                "k": {"type": "integer", "minimum": 1},
                "expected_digest": {"type": "string", "pattern": "^[0-9a-f]{64}$"}
            },
            "additionalProperties": False
        },
        "quorum": {"type": "integer", "minimum": 1},
        "deadline": {"type": "integer", "minimum": 1},
        "quorum_root": {"type": "string"}
    },
    "required": ["service", "handler"],
    "additionalProperties": False
}

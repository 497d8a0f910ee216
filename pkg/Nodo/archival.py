"""
Modo archival: registros de efectos y estado histórico para nodos selectivos.
"""
from dataclasses import dataclass

from Comun.errores import FrontierBehind, NotHosted
from Lyquid.estructuras import Raices
from Lyquid.runtime import Runtime
from Lyquid.valor import json_a_valor, valor_a_json

COMMITTED = 'committed'
REVERTED = 'reverted'


@dataclass(frozen=True)
class EffectRecord:
    position: int
    index: int
    parent: int
    span: int
    source: str
    target: str
    method: str
    args: tuple
    result: object
    gas: int
    error: str = None
    status: str = COMMITTED

    @property
    def key(self):
        return (self.position, self.target, self.index)

    @classmethod
    def from_effect(cls, efecto, status):
        return cls(
            efecto.position, efecto.index, efecto.parent, efecto.span,
            efecto.source, efecto.target, efecto.method, tuple(efecto.args),
            efecto.result, efecto.gas, efecto.error, status,
        )

    def to_dict(self):
        return {
            'position': self.position,
            'index': self.index,
            'parent': self.parent,
            'span': self.span,
            'source': self.source,
            'target': self.target,
            'method': self.method,
            'args': valor_a_json(list(self.args)),
            'result': None if self.result is None else valor_a_json(self.result),
            'gas': self.gas,
            'error': self.error,
            'status': self.status,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            d['position'], d['index'], d['parent'], d['span'],
            d['source'], d['target'], d['method'],
            tuple(json_a_valor(d['args'])),
            None if d['result'] is None else json_a_valor(d['result']),
            d['gas'], d.get('error'), d.get('status', COMMITTED),
        )


def records_from_outcome(outcome):
    """
    Registros de las llamadas internas de una entrada ejecutada
    """
    status = COMMITTED if outcome.ok else REVERTED
    return [
        EffectRecord.from_effect(e, status)
        for e in outcome.effects if e.kind == 'inner-call'
    ]


def serve_effects(node, targets, start, end):
    """
    Registros de toda entrada en [start, end] con alguna llamada que toque
    `targets` (como destino u origen), en orden (posición, índice)
    """
    if end > node.position:
        raise FrontierBehind(
            f"El archival {node.node_id} va en {node.position}, se pidió hasta {end}"
        )
    targets = set(targets) if targets is not None else None
    salida = []
    for position in range(start, end + 1):
        registros = node.records.get(position, {})
        if targets is None or any(r.target in targets or r.source in targets for r in registros.values()):
            salida.extend(sorted(registros.values(), key=lambda r: r.index))
    return salida


def serve_state(node, service, root, position):
    """
    Valor de una raíz de red tal como quedó tras `position`: se materializa el
    snapshot más cercano anterior y se reejecuta hasta la posición pedida
    """
    if not node.runtime.hosts(service):
        raise NotHosted(f"El nodo {node.node_id} no aloja '{service}'")
    if position > node.position:
        raise FrontierBehind(f"El nodo {node.node_id} va en {node.position}, se pidió {position}")

    if position == node.position:
        return node.runtime.read_root(service, root)
    base = node.runtime.spaces[service].latest_snapshot(position).position

    replay = Runtime(resolver=node.resolver)
    for nombre, space in node.runtime.spaces.items():
        replay.bundles[nombre] = node.runtime.bundles[nombre]
        replay.spaces[nombre] = space.materialize(space.latest_snapshot(base))
    for entry in node.sequencer.read(base + 1, position):
        node.procesar(replay, entry)
    return Raices(replay.spaces[service], 'network')[root].valor()

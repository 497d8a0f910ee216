"""
Red simulada determinista: reloj de pasos global, entrega de mensajes con
demora uniforme sembrada, caídas y particiones, y la traza de todo lo ocurrido.

Un solo hilo: los eventos se procesan en orden (paso, orden de alta), que para
mensajes coincide con (paso de entrega, id de mensaje). El secuenciador es el
nodo 0.
"""
import hashlib
import heapq
import itertools
import json
import random
from dataclasses import dataclass, field

from Comun.errores import EffectGap, LyquorError, PastStep
from Comun.logs import get_logger
from Lyquid.valor import decode, encode
from Nodo.archival import EffectRecord, serve_effects
from Nodo.gateway import gateway_call
from Nodo.node import Node
from Secuencia.log import Sequencer
from Upc.invoke import UpcPort, atender_request, atender_response

logger = get_logger(__name__)

SEQUENCER_ID = 0
CLIENT_ID = -1

MESSAGE_KINDS = ('gateway', 'effects-pull', 'upc-request', 'upc-response', 'batch-notify')
FAULT_KINDS = ('crash', 'recover', 'partition', 'heal')


@dataclass(frozen=True)
class Fault:
    kind: str
    nodes: tuple = ()
    other: tuple = ()

    def __post_init__(self):
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"Falla desconocida: {self.kind}")
        if self.kind in ('crash', 'recover') and len(self.nodes) != 1:
            raise ValueError(f"{self.kind} aplica a exactamente un nodo")

    @classmethod
    def crash(cls, node):
        return cls('crash', (node,))

    @classmethod
    def recover(cls, node):
        return cls('recover', (node,))

    @classmethod
    def partition(cls, lado_a, lado_b):
        return cls('partition', tuple(sorted(lado_a)), tuple(sorted(lado_b)))

    @classmethod
    def heal(cls):
        return cls('heal')

    def to_dict(self):
        return {'kind': self.kind, 'nodes': list(self.nodes), 'other': list(self.other)}


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    delay: tuple = (1, 3)
    step_limit: int = 10_000
    faults: tuple = ()
    poll_interval: int = 4
    pull_retries: int = 8

    def __post_init__(self):
        minimo, maximo = self.delay
        if not 0 <= minimo <= maximo:
            raise ValueError(f"Demora inválida: {self.delay}")
        pasos = [step for step, _ in self.faults]
        if pasos != sorted(pasos):
            raise ValueError("El calendario de fallas debe estar ordenado por paso")


@dataclass(frozen=True)
class Message:
    id: int
    src: int
    dst: int
    kind: str
    payload: bytes
    send_step: int
    deliver_step: int


@dataclass
class SimNode:
    node: Node
    archival_peer: int = None
    crashed: bool = False
    busy: int = 0
    diferido: bool = False
    sealed_known: int = 0
    pulls: dict = field(default_factory=dict)


class SimNet:

    def __init__(self, config=None, sequencer=None, bundles=None):
        self.config = config or SimConfig()
        self.rng = random.Random(self.config.seed)
        self.sequencer = sequencer or Sequencer()
        self.bundles = {}
        self.nodes = {}
        self.now = 0
        self.trace = []
        self.upcs = {}
        self.respuestas = {}
        self.partition = None
        self.step_limit_exceeded = False
        self._cola = []
        self._orden = itertools.count()
        self._msg_ids = itertools.count(1)
        self._call_ids = itertools.count(1)
        for bundle in (bundles or {}).values():
            self.deploy(bundle)
        for step, fault in self.config.faults:
            self.inject(fault, step)

    # ==================== TRAZA ====================

    def record(self, event, **campos):
        self.trace.append({'step': self.now, 'event': event, **campos})

    def trace_lines(self):
        return ''.join(json.dumps(r, sort_keys=True) + '\n' for r in self.trace)

    def next_call_id(self):
        return next(self._call_ids)

    # ==================== ALTA ====================

    def deploy(self, bundle):
        self.bundles[bundle.name] = bundle
        self.sequencer.register_service(bundle.name)

    def spawn_node(self, profile, name=None, archival_peer=None, parallel=False,
                   instance_init=None, data_dir=None, bundles=None):
        """
        Suma un nodo con frontera vacía; los ids se asignan desde 1
        """
        node_id = len(self.nodes) + 1
        node = Node(
            node_id, self.sequencer, bundles if bundles is not None else self.bundles,
            profile, data_dir=data_dir, parallel=parallel,
            instance_init=instance_init, name=name,
        )
        node.upc = UpcPort(self, node_id)
        self.nodes[node_id] = SimNode(node, archival_peer)
        self.record('spawn', node=node_id, name=node.name, hosted=sorted(node.hosted),
                    archival=profile.archival)
        return node_id

    def node_by_name(self, name):
        for node_id, sn in self.nodes.items():
            if sn.node.name == name:
                return node_id
        raise KeyError(f"No hay un nodo llamado {name!r}")

    def _peer_de(self, sn):
        if sn.archival_peer is not None:
            return sn.archival_peer
        for node_id, otro in sorted(self.nodes.items()):
            if otro.node.profile.archival and otro is not sn:
                return node_id
        return None

    # ==================== AGENDA ====================

    def _agendar(self, step, tipo, dato):
        heapq.heappush(self._cola, (step, next(self._orden), tipo, dato))

    def schedule(self, step, accion, etiqueta='call'):
        """Trabajo arbitrario (intenciones, sellos, llamadas) en un paso."""
        if step < self.now:
            raise PastStep(f"El paso {step} ya pasó (ahora {self.now})")
        self._agendar(step, 'call', (etiqueta, accion))

    def inject(self, fault, step):
        if step < self.now:
            raise PastStep(f"El paso {step} ya pasó (ahora {self.now})")
        self._agendar(step, 'fault', fault)

    def send(self, src, dst, kind, payload):
        minimo, maximo = self.config.delay
        mensaje = Message(
            next(self._msg_ids), src, dst, kind, payload,
            self.now, self.now + self.rng.randint(minimo, maximo),
        )
        self._agendar(mensaje.deliver_step, 'deliver', mensaje)
        self.record('send', id=mensaje.id, src=src, dst=dst, kind=kind,
                    deliver=mensaje.deliver_step, payload=_digest(payload))
        return mensaje

    # ==================== BUCLE ====================

    def step(self, limite=None):
        """
        Procesa todos los eventos del próximo paso pendiente (≤ limite).
        Sin eventos, adelanta el reloj hasta `limite` y devuelve False.
        """
        if not self._cola or (limite is not None and self._cola[0][0] > limite):
            if limite is not None:
                self.now = max(self.now, limite)
            return False
        actual = self._cola[0][0]
        self.now = max(self.now, actual)
        while self._cola and self._cola[0][0] == actual:
            _step, _orden, tipo, dato = heapq.heappop(self._cola)
            self._procesar(tipo, dato)
        return True

    def run_until(self, step):
        while self._cola and self._cola[0][0] <= step:
            self.step()
        self.now = max(self.now, step)

    def run(self):
        """
        Corre hasta quiescencia o hasta el límite de pasos; devuelve la traza
        """
        while self._cola:
            if self._cola[0][0] > self.config.step_limit:
                self.step_limit_exceeded = True
                self.record('step-limit-exceeded', pending=len(self._cola))
                break
            self.step()
        self.record('end', frontier={str(n): sn.node.position for n, sn in sorted(self.nodes.items())})
        return self.trace

    def _procesar(self, tipo, dato):
        if tipo == 'deliver':
            self._entregar(dato)
        elif tipo == 'fault':
            self._aplicar_falla(dato)
        elif tipo == 'poll':
            self._reintentar(*dato)
        else:
            etiqueta, accion = dato
            accion()

    # ==================== FALLAS ====================

    def _aplicar_falla(self, fault):
        self.record('fault', **fault.to_dict())
        if fault.kind == 'crash':
            self.nodes[fault.nodes[0]].crashed = True
        elif fault.kind == 'recover':
            sn = self.nodes[fault.nodes[0]]
            if not sn.crashed:
                return
            sn.crashed = False
            sn.sealed_known = self.sequencer.sealed_frontier
            self.resume(sn)
        elif fault.kind == 'partition':
            self.partition = (frozenset(fault.nodes), frozenset(fault.other))
        else:
            self.partition = None

    def _cortado(self, src, dst):
        if self.partition is None:
            return False
        lado_a, lado_b = self.partition
        return (src in lado_a and dst in lado_b) or (src in lado_b and dst in lado_a)

    # ==================== ENTREGA ====================

    def _entregar(self, mensaje):
        sn = self.nodes.get(mensaje.dst)
        if sn is not None and (sn.crashed or self._cortado(mensaje.src, mensaje.dst)):
            self.record('drop', id=mensaje.id, dst=mensaje.dst, kind=mensaje.kind)
            return
        self.record('deliver', id=mensaje.id, dst=mensaje.dst, kind=mensaje.kind)
        if mensaje.kind == 'batch-notify':
            _numero, _inicio, fin = decode(mensaje.payload)
            sn.sealed_known = max(sn.sealed_known, fin)
            self.resume(sn)
        elif mensaje.kind == 'effects-pull':
            self._atender_pull(sn, mensaje)
        elif mensaje.kind == 'upc-request':
            atender_request(self, sn, mensaje)
        elif mensaje.kind == 'upc-response':
            atender_response(self, mensaje)
        elif mensaje.kind == 'gateway':
            self._atender_gateway(sn, mensaje)

    # ==================== SECUENCIADOR ====================

    def submit(self, intent):
        try:
            position = self.sequencer.submit(intent)
        except LyquorError as e:
            self.record('rejected', service=intent.target, method=intent.method, code=e.code)
            return None
        self.record('submit', position=position, service=intent.target, method=intent.method)
        return position

    def seal(self):
        batch = self.sequencer.seal_batch()
        self.record('seal', batch=batch.number, start=batch.start, end=batch.end)
        payload = encode([batch.number, batch.start, batch.end])
        for node_id in sorted(self.nodes):
            self.send(SEQUENCER_ID, node_id, 'batch-notify', payload)
        return batch

    # ==================== AVANCE DE NODOS ====================

    def resume(self, sn):
        """Intenta llevar el nodo hasta la frontera sellada que conoce."""
        if sn.crashed:
            return
        if sn.busy:
            sn.diferido = True
            return
        sn.diferido = False
        nodo = sn.node
        if nodo.position >= sn.sealed_known:
            return
        antes = nodo.position
        try:
            nodo.run_until(sn.sealed_known)
        except EffectGap:
            batch = self.sequencer.batch_of(nodo.position + 1)
            self.record('stall', node=nodo.node_id, position=nodo.position + 1, batch=batch.number)
            self._pedir_efectos(sn, batch)
        if nodo.position != antes:
            self.record('frontier', node=nodo.node_id, position=nodo.position)

    def _pedir_efectos(self, sn, batch):
        if batch.number in sn.pulls:
            return
        peer = self._peer_de(sn)
        if peer is None:
            self.record('no-archival-peer', node=sn.node.node_id)
            return
        sn.pulls[batch.number] = 0
        self._enviar_pull(sn, peer, batch)

    def _enviar_pull(self, sn, peer, batch):
        payload = encode(['request', batch.number, batch.start, batch.end, sorted(sn.node.hosted)])
        self.send(sn.node.node_id, peer, 'effects-pull', payload)
        self._agendar(self.now + self.config.poll_interval, 'poll', (sn.node.node_id, peer, batch))

    def _reintentar(self, node_id, peer, batch):
        sn = self.nodes[node_id]
        if sn.node.has_effects(batch.number) or batch.number not in sn.pulls:
            return
        if sn.crashed:
            del sn.pulls[batch.number]
            return
        sn.pulls[batch.number] += 1
        if sn.pulls[batch.number] > self.config.pull_retries:
            self.record('pull-abandoned', node=node_id, batch=batch.number)
            logger.warning("Nodo %d abandona el pull del batch %d", node_id, batch.number)
            return
        self.record('pull-retry', node=node_id, batch=batch.number, attempt=sn.pulls[batch.number])
        self._enviar_pull(sn, peer, batch)

    def _atender_pull(self, sn, mensaje):
        datos = decode(mensaje.payload)
        nodo = sn.node
        if datos[0] == 'request':
            _tipo, numero, inicio, fin, targets = datos
            if sn.busy:
                return
            if nodo.position < fin:
                sn.sealed_known = max(sn.sealed_known, fin)
                try:
                    nodo.run_until(fin)
                except EffectGap:
                    return
            registros = serve_effects(nodo, targets, inicio, fin)
            respuesta = encode(['reply', numero, [_registro_a_valor(r) for r in registros]])
            self.send(nodo.node_id, mensaje.src, 'effects-pull', respuesta)
            return
        _tipo, numero, registros = datos
        if not nodo.has_effects(numero):
            nodo.receive_effects(numero, [_valor_a_registro(v) for v in registros])
            sn.pulls.pop(numero, None)
            self.resume(sn)

    # ==================== GATEWAY ====================

    def _atender_gateway(self, sn, mensaje):
        etiqueta, pedido = json.loads(mensaje.payload.decode('utf-8'))
        sn.busy += 1
        try:
            respuesta = gateway_call(sn.node, pedido, submit=self.submit)
        except LyquorError as e:
            respuesta = {'error': e.code, 'message': e.message}
        finally:
            sn.busy -= 1
        self.record('gateway', node=sn.node.node_id, label=etiqueta, response=respuesta)
        self.respuestas[etiqueta] = respuesta
        if sn.diferido:
            self.resume(sn)

    def gateway(self, node_id, etiqueta, pedido):
        """Envía una petición de gateway de un cliente a un nodo."""
        payload = json.dumps([etiqueta, pedido], sort_keys=True).encode('utf-8')
        return self.send(CLIENT_ID, node_id, 'gateway', payload)

    def final_digests(self):
        return {
            sn.node.name: {s: sn.node.runtime.network_digest(s) for s in sorted(sn.node.hosted)}
            for _id, sn in sorted(self.nodes.items())
        }


def _digest(payload):
    return hashlib.sha256(payload).hexdigest()[:16]


def _registro_a_valor(r):
    return [r.position, r.index, -1 if r.parent is None else r.parent, r.span, r.source,
            r.target, r.method, list(r.args), [] if r.result is None else [r.result],
            r.gas, r.error or '', r.status]


def _valor_a_registro(v):
    position, index, parent, span, source, target, method, args, result, gas, error, status = v
    return EffectRecord(position, index, None if parent == -1 else parent, span, source, target,
                        method, tuple(args), result[0] if result else None, gas, error or None, status)

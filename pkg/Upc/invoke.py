"""
Invocación UPC sobre la red simulada: fan-out del handler a los nodos
elegidos, recolección por paso hasta que el agregador se satisface o vence el
plazo, y llamadas anidadas desde dentro de un handler.
"""
from Comun import config
from Comun.errores import (
    DepthExceeded, LyquorError, MethodError, MethodNotFound, NoEligibleNodes, NotHosted, QuorumNotMet,
)
from Comun.logs import get_logger
from Lyquid.valor import Address, decode, digest, encode, valor_a_json
from Upc.call import ERROR, INVALID, TIMEOUT, UpcResponse

logger = get_logger(__name__)


class UpcPort:
    """Capacidad `ctx.upc` de un contexto de instancia."""

    def __init__(self, sim, node_id, depth=0, deadline_step=None):
        self.sim = sim
        self.node_id = node_id
        self.depth = depth
        self.deadline_step = deadline_step

    def invoke(self, call):
        if self.depth == 0:
            return upc_invoke(self.sim, self.node_id, call)
        return nested_invoke(self, call)


class _EstadoLlamada:

    def __init__(self, call_id, seleccionados):
        self.call_id = call_id
        self.seleccionados = set(seleccionados)
        self.buzon = []
        self.respondidos = set()
        self.abierta = True

    def recibir(self, respuesta):
        if respuesta.node in self.respondidos or respuesta.node not in self.seleccionados:
            return False
        self.respondidos.add(respuesta.node)
        self.buzon.append(respuesta)
        return True


def upc_invoke(sim, origin, call, depth=1, limite=None):
    """
    Multicast del handler a los nodos elegidos; devuelve el agregado
    """
    nodo = sim.nodes[origin].node
    if not nodo.runtime.hosts(call.service):
        raise NotHosted(f"El nodo {origin} no aloja '{call.service}'")
    if call.handler not in nodo.runtime.bundles[call.service].upc_handlers:
        raise MethodNotFound(f"{call.service} no tiene el handler '{call.handler}'")

    def leer_raiz(nombre):
        return nodo.runtime.read_root(call.service, nombre)

    candidatos = [n for n, sn in sim.nodes.items() if sn.node.runtime.hosts(call.service)]
    seleccion = call.selector.select(candidatos, leer_raiz)
    if call.aggregator.kind == 'single_node':
        seleccion = seleccion[:1]
    if not seleccion:
        raise NoEligibleNodes(f"Ningún nodo elegible para {call.service}.{call.handler}")
    quorum = leer_raiz(call.quorum_root) if call.quorum_root else call.quorum
    if isinstance(quorum, bool) or not isinstance(quorum, int) or quorum < 1:
        raise MethodError(
            'invalid-quorum',
            f"La raíz '{call.quorum_root}' de {call.service} no es un quórum válido: {quorum!r}",
        )
    plazo = call.deadline if limite is None else min(call.deadline, limite)
    vence = sim.now + plazo

    call_id = sim.next_call_id()
    estado = _EstadoLlamada(call_id, seleccion)
    sim.upcs[call_id] = estado
    payload = encode([call_id, call.service, call.handler, list(call.args), depth, vence, origin])
    sim.record('upc-call', call=call_id, origin=origin, service=call.service, handler=call.handler,
               selection=seleccion, depth=depth, deadline=vence, args=digest(list(call.args)))
    for destino in seleccion:
        sim.send(origin, destino, 'upc-request', payload)

    respuestas = []
    validas = []
    agregador = call.aggregator
    while not agregador.satisfied(validas, estado.respondidos, estado.seleccionados, quorum):
        if sim.now >= vence or not sim.step(limite=vence):
            break
        nuevas = sorted(estado.buzon, key=lambda r: r.node)
        estado.buzon.clear()
        for respuesta in nuevas:
            if respuesta.valid and not agregador.validate(respuesta.payload):
                respuesta = UpcResponse(respuesta.node, respuesta.payload, INVALID)
            respuestas.append(respuesta)
            if respuesta.valid:
                validas.append(respuesta)
    estado.abierta = False

    for nodo_id in seleccion:
        if nodo_id not in estado.respondidos:
            respuestas.append(UpcResponse(nodo_id, fault=TIMEOUT))
    estados = {str(r.node): r.fault or 'ok' for r in respuestas}

    if len(validas) < agregador.needed(quorum):
        codigos = sorted({r.code for r in respuestas if r.code})
        detalle = '; '.join(f"{r.node}: {r.message}" for r in respuestas if r.code)
        sim.record('upc-result', call=call_id, status='quorum-not-met', responses=estados)
        logger.warning("UPC %d %s.%s sin quórum (%d/%d válidas)",
                       call_id, call.service, call.handler, len(validas), quorum)
        raise QuorumNotMet(
            f"UPC {call.service}.{call.handler}: {len(validas)} respuestas válidas, "
            f"se necesitaban {agregador.needed(quorum)}" + (f" [{detalle}]" if detalle else ''),
            codes=codigos,
        )
    resultado = agregador.aggregate(validas)
    sim.record('upc-result', call=call_id, status='ok', responses=estados,
               result=valor_a_json(resultado))
    return resultado


def nested_invoke(port, call):
    """
    UPC desde dentro de un handler: profundidad acotada y plazo anidado
    """
    profundidad = port.depth + 1
    if profundidad > config.UPC_MAX_DEPTH:
        raise DepthExceeded(f"Profundidad UPC {profundidad} supera el límite {config.UPC_MAX_DEPTH}")
    restante = port.deadline_step - port.sim.now
    if restante <= 0:
        raise QuorumNotMet(f"Sin plazo restante para {call.service}.{call.handler}")
    return upc_invoke(port.sim, port.node_id, call, profundidad, limite=restante)


# ==================== LADO RECEPTOR ====================

def atender_request(sim, sn, mensaje):
    """
    Ejecuta el handler pedido contra el estado de instancia del nodo y responde
    """
    call_id, service, handler, args, depth, vence, origin = decode(mensaje.payload)
    nodo = sn.node
    port = UpcPort(sim, nodo.node_id, depth, vence)
    sn.busy += 1
    try:
        resultado = nodo.runtime.exec_handler(
            service, handler, args, Address.for_account(f"node-{origin}"),
            node_id=nodo.node_id, upc=port,
        )
        respuesta = [call_id, 'ok', resultado]
    except LyquorError as e:
        respuesta = [call_id, ERROR, [e.code, e.message]]
    finally:
        sn.busy -= 1
    sim.send(nodo.node_id, mensaje.src, 'upc-response', encode(respuesta))
    sim.resume(sn)


def atender_response(sim, mensaje):
    call_id, status, dato = decode(mensaje.payload)
    estado = sim.upcs.get(call_id)
    if status == 'ok':
        respuesta = UpcResponse(mensaje.src, dato)
    else:
        codigo, mensaje_error = dato
        respuesta = UpcResponse(mensaje.src, fault=ERROR, code=codigo, message=mensaje_error)
    if estado is None or not estado.abierta or not estado.recibir(respuesta):
        sim.record('upc-late', call=call_id, node=mensaje.src)

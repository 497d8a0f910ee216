"""
Oráculo de un escenario: una sola réplica completa, sin red simulada, que
ejecuta el log en orden. Las réplicas selectivas de la simulación deben
coincidir con él servicio por servicio.
"""
from Comun.errores import LyquorError
from Comun.logs import get_logger
from Comun.respuestas import parsear_body, respuesta, respuesta_error
from Escenarios.escenario import cargar, intents_con_envios, validar
from Lyquid.estructuras import Raices
from Lyquid.valor import valor_a_json
from Lyquids.registro import construir_todos
from Nodo.node import HostingProfile, Node
from Secuencia.log import Sequencer

logger = get_logger(__name__)


def volcar_servicio(runtime, service):
    """
    {'roots': {nombre: JSON}, 'digest': hex} de la región de red
    """
    raices = Raices(runtime.spaces[service], 'network')
    return {
        'roots': {nombre: valor_a_json(valor) for nombre, valor in raices.valores().items()},
        'digest': runtime.network_digest(service),
    }


def volcar_nodo(node):
    return {
        'position': node.position,
        'hosted': sorted(node.hosted),
        'services': {s: volcar_servicio(node.runtime, s) for s in sorted(node.hosted)},
        'outcomes': {
            str(p): {'status': o.status, 'error': o.error}
            for p, o in sorted(node.outcomes.items())
        },
    }


def ejecutar_oraculo(escenario, intents=None):
    """
    Corre el escenario en una réplica completa. `intents` es el log ya
    secuenciado (en orden); sin él se arma desde las intenciones y envíos
    del escenario
    Returns: Node - la réplica al final del log
    """
    bundles = construir_todos(escenario.get('deployments', []))
    sequencer = Sequencer()
    for service in bundles:
        sequencer.register_service(service)
    node = Node(0, sequencer, bundles, HostingProfile(archival=True), name='oracle')
    for intent in intents_con_envios(escenario) if intents is None else intents:
        try:
            sequencer.submit(intent)
        except LyquorError as e:
            logger.info("Oráculo: intención rechazada (%s)", e.code)
    if sequencer.last_position > sequencer.sealed_frontier:
        sequencer.seal_batch()
    node.run_until(sequencer.sealed_frontier)
    return node


def oraculo(escenario):
    """Volcado JSON del estado final de la réplica completa."""
    return volcar_nodo(ejecutar_oraculo(escenario))


def cli_oracle(path):
    return oraculo(cargar(path))


def handler(event, context):
    """
    Lambda handler para calcular el volcado del oráculo de un escenario
    """
    try:
        escenario = validar(parsear_body(event))
        return respuesta(200, oraculo(escenario))
    except Exception as e:
        logger.error("Error en oráculo: %s", e)
        return respuesta_error(e)

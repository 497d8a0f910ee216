"""
Ejecución de un escenario sobre la red simulada y evaluación de sus
aserciones contra el oráculo de réplica completa.
"""
import json
from dataclasses import dataclass
from pathlib import Path

from jsonschema import ValidationError

from Comun.errores import LyquorError
from Comun.logs import get_logger
from Comun.respuestas import parsear_body, respuesta, respuesta_error
from Escenarios.escenario import cargar, intents_ordenados, pasos_de_sello, validar
from Escenarios.oracle import ejecutar_oraculo, volcar_nodo
from Lyquid.valor import json_a_valor, valor_a_json
from Lyquids.registro import construir_todos, convertir_instancia
from Nodo.node import HostingProfile
from Simulacion.simnet import Fault, SimConfig, SimNet

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_INVALID = 2


@dataclass
class Resultado:
    sim: SimNet
    oracle: object
    ids: dict
    report: dict

    @property
    def passed(self):
        return self.report['passed']

    def state(self):
        return {
            name: volcar_nodo(self.sim.nodes[node_id].node)
            for name, node_id in sorted(self.ids.items())
        }


# ==================== ARMADO ====================

def _clave(valor):
    return tuple(_clave(v) for v in valor) if isinstance(valor, list) else valor


def armar(escenario, seed=None, out_dir=None):
    """
    Red simulada con nodos, intenciones, sellos, llamadas y fallas agendadas
    Returns: (SimNet, dict) - (red, nombre de nodo → id)
    """
    semilla = escenario.get('seed', 0) if seed is None else seed
    sim = SimNet(
        SimConfig(
            seed=semilla,
            delay=tuple(escenario.get('delay', (1, 3))),
            step_limit=escenario.get('step_limit', 10_000),
            poll_interval=escenario.get('poll_interval', 4),
        ),
        bundles=construir_todos(escenario.get('deployments', [])),
    )

    ids = {}
    for spec in escenario.get('nodes', []):
        profile = HostingProfile(frozenset(spec.get('hosted', [])), spec.get('archival', False))
        # Un nodo selectivo solo conoce los bundles que aloja
        bundles = sim.bundles if profile.archival else {s: sim.bundles[s] for s in profile.hosted}
        data_dir = Path(out_dir) / 'nodes' / spec['name'] if out_dir is not None else None
        ids[spec['name']] = sim.spawn_node(
            profile, spec['name'], parallel=spec.get('parallel', False),
            instance_init=convertir_instancia(spec.get('instance')),
            data_dir=data_dir, bundles=bundles,
        )
    for spec in escenario.get('nodes', []):
        if spec.get('archival_peer'):
            sim.nodes[ids[spec['name']]].archival_peer = ids[spec['archival_peer']]

    for falla in escenario.get('faults', []):
        sim.inject(_convertir_falla(falla, ids), falla['step'])
    for step, intent in intents_ordenados(escenario):
        sim.schedule(step, lambda intent=intent: sim.submit(intent), 'submit')
    for step in pasos_de_sello(escenario):
        sim.schedule(step, sim.seal, 'seal')
    for llamada in escenario.get('calls', []):
        pedido = {k: llamada[k] for k in ('service', 'method', 'args', 'caller', 'gas_limit') if k in llamada}
        pedido['kind'] = llamada.get('kind', 'call')
        node_id = ids[llamada['node']]
        sim.schedule(
            llamada['step'],
            lambda n=node_id, e=llamada['label'], p=pedido: sim.gateway(n, e, p),
            'gateway',
        )
    return sim, ids


def _convertir_falla(falla, ids):
    kind = falla['kind']
    if kind in ('crash', 'recover'):
        if 'node' not in falla:
            raise ValueError(f"La falla {kind} necesita 'node'")
        return getattr(Fault, kind)(ids[falla['node']])
    if kind == 'partition':
        return Fault.partition([ids[n] for n in falla.get('nodes', [])],
                               [ids[n] for n in falla.get('other', [])])
    return Fault.heal()


# ==================== ASERCIONES ====================

def _nodo(resultado, asercion):
    return resultado.sim.nodes[resultado.ids[asercion['node']]].node


def _leer_raiz(node, asercion):
    valor = node.runtime.read_root(asercion['service'], asercion['root'])
    if 'key' in asercion:
        valor = valor.get(_clave(json_a_valor(asercion['key'])))
    return valor


def _check_root(resultado, asercion):
    obtenido = _leer_raiz(_nodo(resultado, asercion), asercion)
    if asercion.get('expected', 'oracle') == 'oracle':
        esperado = _leer_raiz(resultado.oracle, asercion)
    else:
        esperado = json_a_valor(asercion['expected'])
    return valor_a_json(obtenido) == valor_a_json(esperado), f"{valor_a_json(obtenido)!r} vs {valor_a_json(esperado)!r}"


def _check_digest(resultado, asercion):
    node = _nodo(resultado, asercion)
    services = [asercion['service']] if 'service' in asercion else sorted(node.hosted)
    distintos = [
        s for s in services
        if node.runtime.network_digest(s) != resultado.oracle.runtime.network_digest(s)
    ]
    return not distintos, f"difieren del oráculo: {distintos}" if distintos else "iguales al oráculo"


def _check_outcome(resultado, asercion):
    outcome = _nodo(resultado, asercion).outcomes.get(asercion['position'])
    if outcome is None:
        return False, f"la posición {asercion['position']} no se ejecutó"
    exito = outcome.status == asercion.get('status', outcome.status)
    if 'error' in asercion:
        exito = exito and outcome.error == asercion['error']
    return exito, f"{outcome.status} {outcome.error or ''}".strip()


def _check_effect(resultado, asercion):
    outcome = _nodo(resultado, asercion).outcomes.get(asercion['position'])
    if outcome is None:
        return False, f"la posición {asercion['position']} no se ejecutó"
    llamadas = [
        (e.source, e.target, e.method) for e in outcome.effects if e.kind == 'inner-call'
    ]
    for _source, target, method in llamadas:
        if target == asercion.get('target', target) and method == asercion.get('method', method):
            return True, f"{llamadas}"
    return False, f"sin llamada a {asercion.get('target')}.{asercion.get('method')}: {llamadas}"


def _check_call(resultado, asercion):
    recibida = resultado.sim.respuestas.get(asercion['label'])
    if recibida is None:
        return False, "sin respuesta"
    if 'error' in asercion:
        return recibida.get('error') == asercion['error'], json.dumps(recibida, sort_keys=True)
    if 'expected' in asercion:
        esperado = valor_a_json(json_a_valor(asercion['expected']))
        return recibida.get('result') == esperado, json.dumps(recibida, sort_keys=True)
    return 'error' not in recibida, json.dumps(recibida, sort_keys=True)


def _check_conservation(resultado, asercion):
    node = _nodo(resultado, asercion)
    balances = node.runtime.read_root(asercion['service'], 'balances')
    total = node.runtime.read_root(asercion['service'], 'total_supply')
    suma = sum(balances.values())
    return suma == total, f"suma {suma}, total {total}"


def _check_frontier(resultado, asercion):
    posicion = _nodo(resultado, asercion).position
    exito = True
    if 'equals' in asercion:
        exito = exito and posicion == asercion['equals']
    if 'max' in asercion:
        exito = exito and posicion <= asercion['max']
    if 'min' in asercion:
        exito = exito and posicion >= asercion['min']
    return exito, f"frontera {posicion}"


def _check_no_bundle(resultado, asercion):
    node = _nodo(resultado, asercion)
    return asercion['service'] not in node.runtime.bundles, f"bundles: {sorted(node.runtime.bundles)}"


CHECKS = {
    'root': _check_root,
    'digest': _check_digest,
    'outcome': _check_outcome,
    'effect': _check_effect,
    'call': _check_call,
    'conservation': _check_conservation,
    'frontier': _check_frontier,
    'no_bundle': _check_no_bundle,
}


def evaluar(resultado, asercion):
    try:
        return CHECKS[asercion['kind']](resultado, asercion)
    except (LyquorError, KeyError, AttributeError) as e:
        return False, f"{type(e).__name__}: {e}"


# ==================== EJECUCIÓN ====================

def ejecutar(escenario, seed=None, out_dir=None):
    """
    Corre el escenario hasta quiescencia y evalúa sus aserciones
    Returns: Resultado
    """
    sim, ids = armar(escenario, seed, out_dir)
    sim.run()
    log = [e.intent for e in sim.sequencer.read(1, sim.sequencer.sealed_frontier)]
    resultado = Resultado(sim, ejecutar_oraculo(escenario, log), ids, {})

    aserciones = []
    for i, asercion in enumerate(escenario.get('assertions', [])):
        exito, detalle = evaluar(resultado, asercion)
        aserciones.append({'index': i, 'kind': asercion['kind'], 'passed': exito, 'detail': detalle})
        if not exito:
            logger.warning("Aserción %d (%s) falló: %s", i, asercion['kind'], detalle)

    resultado.report = {
        'scenario': escenario['name'],
        'seed': sim.config.seed,
        'passed': all(a['passed'] for a in aserciones) and not sim.step_limit_exceeded,
        'step_limit_exceeded': sim.step_limit_exceeded,
        'final_step': sim.now,
        'sealed_frontier': sim.sequencer.sealed_frontier,
        'frontiers': {name: sim.nodes[i].node.position for name, i in sorted(ids.items())},
        'digests': sim.final_digests(),
        'assertions': aserciones,
    }
    return resultado


def escribir_salida(resultado, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / 'trace.jsonl').write_text(resultado.sim.trace_lines(), encoding='utf-8')
    (out / 'state.json').write_text(json.dumps(resultado.state(), indent=2, sort_keys=True), encoding='utf-8')
    (out / 'report.json').write_text(json.dumps(resultado.report, indent=2, sort_keys=True), encoding='utf-8')


def cli_run(path, seed=None, out_dir=None):
    """
    Returns: int - 0 todo pasó, 1 alguna aserción falló, 2 escenario inválido
    """
    try:
        escenario = cargar(path)
        resultado = ejecutar(escenario, seed, out_dir)
    except (ValueError, ValidationError, LyquorError) as e:
        logger.error("Escenario inválido %s: %s", path, getattr(e, 'message', e))
        return EXIT_INVALID
    if out_dir is not None:
        escribir_salida(resultado, out_dir)
    for asercion in resultado.report['assertions']:
        marca = 'OK' if asercion['passed'] else 'FALLA'
        print(f"[{marca}] #{asercion['index']} {asercion['kind']}: {asercion['detail']}")
    return EXIT_OK if resultado.passed else EXIT_ASSERTION


def handler(event, context):
    """
    Lambda handler para correr un escenario y devolver su reporte
    """
    try:
        body = parsear_body(event)
        escenario = validar(body.get('scenario', body))
        resultado = ejecutar(escenario, body.get('seed'))
        return respuesta(200 if resultado.passed else 422, resultado.report)
    except Exception as e:
        logger.error("Error corriendo escenario: %s", e)
        return respuesta_error(e)

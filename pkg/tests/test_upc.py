import json

import pytest
from jsonschema import ValidationError

from Comun.errores import DepthExceeded, MethodNotFound, NoEligibleNodes, NotHosted, QuorumNotMet
from Lyquid.valor import digest
from Lyquids import upc_demo
from Nodo.node import HostingProfile
from Simulacion.simnet import Fault, SimConfig, SimNet
from Upc.call import REDUCERS, Aggregator, Selector, UpcCall
from Upc.invoke import UpcPort, upc_invoke
from tests.conftest import red_upc

BLOB = {'bytes': b'blob'.hex()}


def llamar(sim, node_id, method, *args, label='c'):
    sim.gateway(node_id, label, {'kind': 'call', 'service': 'U', 'method': method, 'args': list(args)})
    sim.run()
    return sim.respuestas[label]


# ==================== REDUCTORES Y VALIDACIÓN ====================

def test_reductores():
    assert REDUCERS['sum']([1, 2, 3]) == 6
    assert REDUCERS['median']([3, 1, 2]) == 2
    assert REDUCERS['median']([4, 1, 3, 2]) == 2
    assert REDUCERS['majority']([1, 2, 2, 3]) == 2
    assert REDUCERS['concat']([[1], [2, 3], 4]) == [1, 2, 3, 4]


@pytest.mark.parametrize('construir', [
    lambda: Aggregator('threshold_shares', 'sum'),
    lambda: Aggregator('collect_all'),
    lambda: Aggregator('promedio'),
    lambda: Selector('first_k'),
    lambda: Selector('filtered'),
    lambda: Selector('todos'),
    lambda: UpcCall('U', 'get_share', quorum=0),
    lambda: UpcCall('U', 'get_share', deadline=0),
])
def test_descripciones_invalidas(construir):
    with pytest.raises(ValueError):
        construir()


def test_seleccion():
    assert Selector().select([3, 1, 2], None) == [1, 2, 3]
    assert Selector('first_k', k=2).select([3, 1, 2], None) == [1, 2]
    assert Selector('listed', nodes=(3, 9)).select([3, 1, 2], None) == [3]
    assert Selector('filtered', root='members').select([3, 1, 2], lambda root: [2, 3]) == [2, 3]


def test_quorum_necesario():
    assert Aggregator('threshold_shares', 'sum', k=3).needed(1) == 3
    assert Aggregator('threshold_shares', 'sum', k=2).needed(4) == 4
    assert Aggregator('first_valid').needed(2) == 2


def test_desde_json():
    call = UpcCall.from_dict({
        'service': 'U', 'handler': 'get_share',
        'selector': {'kind': 'listed', 'nodes': [1, 2]},
        'aggregator': {'kind': 'threshold_shares', 'reducer': 'sum', 'k': 2},
        'quorum': 2, 'deadline': 5,
    })
    assert call.selector.nodes == (1, 2)
    assert call.aggregator.k == 2
    assert call.deadline == 5
    with pytest.raises(ValidationError):
        UpcCall.from_dict({'service': 'U', 'handler': 'x', 'aggregator': {'kind': 'votar'}})


# ==================== INVOCACIÓN ====================

def test_shares_con_umbral():
    sim = red_upc(3)
    assert llamar(sim, 1, 'sum_shares', 3) == {'result': 6, 'position': 0}
    for node_id in (1, 2, 3):
        assert sim.nodes[node_id].node.runtime.read_root('U', 'seen', 'instance') == 1


def test_todos_los_elegidos_reciben_la_misma_peticion():
    sim = red_upc(4)
    llamar(sim, 2, 'sum_shares', 3)
    llamada = next(r for r in sim.trace if r['event'] == 'upc-call')
    pedidos = [r for r in sim.trace if r['event'] == 'send' and r['kind'] == 'upc-request']
    assert sorted(r['dst'] for r in pedidos) == sorted(llamada['selection']) == [1, 2, 3, 4]
    assert len({r['payload'] for r in pedidos}) == 1


@pytest.mark.parametrize('reducer,esperado', [
    ('sum', 6), ('median', 2), ('max', 3), ('min', 1), ('concat', [1, 2, 3]),
])
def test_collect_all(reducer, esperado):
    sim = red_upc(3)
    assert llamar(sim, 2, 'collect_shares', reducer)['result'] == esperado


def test_umbral_mayor_que_los_nodos():
    sim = red_upc(3)
    respuesta = llamar(sim, 1, 'sum_shares', 4)
    assert respuesta['error'] == 'quorum-not-met'


def test_invocacion_directa():
    sim = red_upc(4, shares=[5, 6, 7, 8])
    call = UpcCall('U', 'get_share', selector=Selector('first_k', k=2),
                   aggregator=Aggregator('collect_all', 'sum'), quorum=2)
    assert upc_invoke(sim, 3, call) == 11
    resultados = [e for e in sim.trace if e['event'] == 'upc-result']
    assert resultados[-1]['status'] == 'ok'
    assert resultados[-1]['responses'] == {'1': 'ok', '2': 'ok'}


def test_disponibilidad_con_caidas():
    sim = red_upc(3)
    sim.inject(Fault.crash(2), 0)
    sim.inject(Fault.crash(3), 0)
    assert llamar(sim, 1, 'fetch_blob') == {'result': BLOB, 'position': 0}


def test_todos_los_elegidos_caidos():
    sim = red_upc(3)
    sim.inject(Fault.crash(2), 0)
    sim.inject(Fault.crash(3), 0)
    descripcion = json.dumps({'service': 'U', 'handler': 'fetch', 'selector': {'kind': 'listed', 'nodes': [2, 3]}})
    assert llamar(sim, 1, 'upc', descripcion)['error'] == 'quorum-not-met'
    resultado = [e for e in sim.trace if e['event'] == 'upc-result'][-1]
    assert resultado['responses'] == {'2': 'timeout', '3': 'timeout'}


def test_digest_esperado():
    sim = red_upc(3, blob_digest=digest(b'blob'))
    assert llamar(sim, 1, 'fetch_blob')['result'] == BLOB

    sim = red_upc(3, blob_digest='0' * 64)
    assert llamar(sim, 1, 'fetch_blob')['error'] == 'quorum-not-met'
    resultado = [e for e in sim.trace if e['event'] == 'upc-result'][-1]
    assert set(resultado['responses'].values()) == {'invalid'}


def test_miembros_y_quorum_desde_raices():
    sim = red_upc(3, shares=[10, 20, 30], members=[1, 3], quorum=2)
    assert llamar(sim, 2, 'members_sum')['result'] == 40


def test_quorum_cero_en_raiz_es_invalido():
    sim = red_upc(3, shares=[10, 20, 30], members=[1, 3], quorum=0)
    assert llamar(sim, 2, 'members_sum')['error'] == 'invalid-quorum'
    assert not [e for e in sim.trace if e['event'] == 'upc-call']


def test_upc_anidada():
    sim = red_upc(4)
    assert llamar(sim, 1, 'nested_sum', [[1, 2], [3, 4]])['result'] == 10
    llamadas = [e for e in sim.trace if e['event'] == 'upc-call']
    assert sorted(e['depth'] for e in llamadas) == [1, 2, 2]


def test_recursion_acotada():
    sim = red_upc(2)
    assert llamar(sim, 1, 'recurse_from', 3, label='ok')['result'] == 3
    assert llamar(sim, 1, 'recurse_from', 6, label='hondo')['error'] == 'quorum-not-met'


def test_profundidad_excedida():
    sim = red_upc(1)
    port = UpcPort(sim, 1, depth=4, deadline_step=100)
    with pytest.raises(DepthExceeded):
        port.invoke(UpcCall('U', 'get_share'))


def test_sin_plazo_restante():
    sim = red_upc(1)
    port = UpcPort(sim, 1, depth=1, deadline_step=sim.now)
    with pytest.raises(QuorumNotMet):
        port.invoke(UpcCall('U', 'get_share'))


def test_sin_nodos_elegibles():
    sim = red_upc(2)
    with pytest.raises(NoEligibleNodes):
        upc_invoke(sim, 1, UpcCall('U', 'get_share', selector=Selector('listed', nodes=(9,))))


def test_origen_sin_servicio_o_handler():
    sim = red_upc(2)
    vacio = sim.spawn_node(HostingProfile(frozenset()), 'vacio')
    with pytest.raises(NotHosted):
        upc_invoke(sim, vacio, UpcCall('U', 'get_share'))
    with pytest.raises(MethodNotFound):
        upc_invoke(sim, 1, UpcCall('U', 'no_existe'))


def test_respuestas_tardias_se_descartan():
    sim = SimNet(SimConfig(seed=0, delay=(2, 2)), bundles={'U': upc_demo.build('U')})
    for i in range(2):
        sim.spawn_node(HostingProfile(frozenset({'U'})), f"U{i + 1}", instance_init={'U': {'share': 1}})
    with pytest.raises(QuorumNotMet):
        upc_invoke(sim, 1, UpcCall('U', 'get_share', deadline=3))
    sim.run()
    assert [e['node'] for e in sim.trace if e['event'] == 'upc-late'] == [1, 2]


def test_handler_no_escribe_estado_de_red():
    sim = red_upc(2)
    descripcion = json.dumps({'service': 'U', 'handler': 'touch_network'})
    assert llamar(sim, 1, 'upc', descripcion)['error'] == 'quorum-not-met'
    assert sim.nodes[1].node.runtime.read_root('U', 'quorum') == 1

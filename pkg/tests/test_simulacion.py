import pytest

from Comun.errores import PastStep
from Nodo.node import HostingProfile
from Simulacion.simnet import Fault, SimConfig, SimNet
from tests.conftest import ALICE, INTENTS_DOS_DEX, dos_dex


def red_dos_dex(seed=0, faults=(), **kwargs):
    """Archival Z y selectivo X {A, C} con los siete intents del par de DEX."""
    sim = SimNet(SimConfig(seed=seed, faults=tuple(faults), **kwargs), bundles=dos_dex())
    z = sim.spawn_node(HostingProfile(archival=True), 'Z')
    sim.spawn_node(HostingProfile(frozenset({'A', 'C'})), 'X', archival_peer=z)
    for step, it in enumerate(INTENTS_DOS_DEX, start=1):
        sim.schedule(step, lambda it=it: sim.submit(it))
    sim.schedule(4, sim.seal)
    sim.schedule(7, sim.seal)
    return sim


def eventos(sim, nombre):
    return [e for e in sim.trace if e['event'] == nombre]


@pytest.mark.parametrize('kwargs', [
    {'delay': (3, 1)},
    {'delay': (-1, 2)},
    {'faults': ((5, Fault.heal()), (2, Fault.heal()))},
])
def test_config_invalida(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_fallas_invalidas():
    with pytest.raises(ValueError):
        Fault('apagar')
    with pytest.raises(ValueError):
        Fault('crash', (1, 2))


def test_agenda_en_el_pasado():
    sim = SimNet()
    sim.run_until(5)
    assert sim.now == 5
    with pytest.raises(PastStep):
        sim.schedule(2, lambda: None)
    with pytest.raises(PastStep):
        sim.inject(Fault.heal(), 4)
    assert sim.step() is False


def test_corrida_completa():
    sim = red_dos_dex()
    sim.run()
    z, x = sim.nodes[1].node, sim.nodes[2].node
    assert z.position == x.position == 7
    for service in ('A', 'C'):
        assert x.runtime.network_digest(service) == z.runtime.network_digest(service)
    assert len(eventos(sim, 'submit')) == 7
    assert [(e['start'], e['end']) for e in eventos(sim, 'seal')] == [(1, 4), (5, 7)]
    assert eventos(sim, 'stall')
    assert sim.trace[-1] == {'step': sim.now, 'event': 'end', 'frontier': {'1': 7, '2': 7}}


def test_misma_semilla_misma_traza():
    a, b = red_dos_dex(seed=11), red_dos_dex(seed=11)
    a.run()
    b.run()
    assert a.trace_lines() == b.trace_lines()
    assert a.final_digests() == b.final_digests()


def test_estado_final_independiente_de_la_semilla():
    digests = set()
    for seed in range(5):
        sim = red_dos_dex(seed=seed)
        sim.run()
        digests.add(repr(sim.final_digests()))
    assert len(digests) == 1


def test_demoras_dentro_del_rango():
    sim = red_dos_dex(seed=3, delay=(2, 5))
    sim.run()
    for envio in eventos(sim, 'send'):
        assert 2 <= envio['deliver'] - envio['step'] <= 5


def test_particion_sin_curar():
    sim = red_dos_dex(faults=[(0, Fault.partition([2], [1]))])
    sim.run()
    assert sim.nodes[2].node.position == 1
    assert any(e['kind'] == 'effects-pull' for e in eventos(sim, 'drop'))
    assert eventos(sim, 'pull-abandoned')
    assert sim.nodes[1].node.position == 7


def test_particion_curada_a_tiempo():
    sim = red_dos_dex(faults=[(0, Fault.partition([2], [1])), (12, Fault.heal())])
    sim.run()
    z, x = sim.nodes[1].node, sim.nodes[2].node
    assert x.position == 7
    assert x.runtime.network_digest('C') == z.runtime.network_digest('C')
    assert eventos(sim, 'pull-retry')


def test_caida_y_recuperacion():
    sim = red_dos_dex(faults=[(0, Fault.crash(2)), (40, Fault.recover(2))])
    sim.run_until(39)
    assert sim.nodes[2].node.position == 0
    sim.run()
    assert sim.nodes[2].node.position == 7
    assert [e['kind'] for e in eventos(sim, 'fault')] == ['crash', 'recover']


def test_limite_de_pasos():
    sim = red_dos_dex(step_limit=3)
    sim.run()
    assert sim.step_limit_exceeded
    assert eventos(sim, 'step-limit-exceeded')
    assert sim.nodes[1].node.position == 0


def test_gateway_send_por_la_red():
    sim = red_dos_dex()
    pedido = {'kind': 'send', 'service': 'C', 'method': 'transfer',
              'args': [{'account': 'carol'}, 1], 'caller': {'account': 'bob'}}
    sim.schedule(20, lambda: sim.gateway(1, 'envio', pedido))
    sim.schedule(30, sim.seal)
    sim.run()
    assert sim.respuestas['envio'] == {'position': 8}
    assert sim.nodes[1].node.position == 8
    assert sim.node_by_name('X') == 2
    with pytest.raises(KeyError):
        sim.node_by_name('Q')
    assert sim.nodes[1].node.runtime.read_root('C', 'balances')[ALICE] == 0

import pytest

from Lyquid.valor import Address
from Lyquids import counter, dex, erc20, router, upc_demo
from Nodo.archival import serve_effects
from Nodo.node import HostingProfile, Node
from Secuencia.log import CallIntent, Sequencer
from Simulacion.simnet import SimConfig, SimNet

ALICE = Address.for_account('alice')
BOB = Address.for_account('bob')
CAROL = Address.for_account('carol')


def intent(caller, target, method, *args, gas_limit=1_000_000):
    return CallIntent(caller, target, method, tuple(args), gas_limit)


INTENTS_DOS_DEX = [
    intent(ALICE, 'A', 'swap', 50),
    intent(BOB, 'B', 'swap', 100),
    intent(ALICE, 'A', 'swap', 100),
    intent(BOB, 'B', 'transfer_credit', CAROL, 10),
    intent(ALICE, 'A', 'transfer_credit', CAROL, 5),
    intent(ALICE, 'C', 'transfer', BOB, 50),
    intent(BOB, 'B', 'swap', 50),
]


def dos_dex():
    """Token C con dos DEX (A y B) que ya tienen allowance de alice y bob."""
    a, b = Address.for_service('A'), Address.for_service('B')
    token = erc20.build(
        'C', ALICE,
        balances={ALICE: 150, BOB: 300, a: 1000, b: 1000},
        allowances=[(ALICE, a, 10 ** 6), (ALICE, b, 10 ** 6), (BOB, a, 10 ** 6), (BOB, b, 10 ** 6)],
    )
    return {'C': token, 'A': dex.build('A', 'C'), 'B': dex.build('B', 'C')}


def cargar_intents(sequencer, intents, batch=None):
    """Envía las intenciones sellando cada `batch` entradas (y al final)."""
    for i, it in enumerate(intents, start=1):
        sequencer.submit(it)
        if batch and i % batch == 0:
            sequencer.seal_batch()
    if sequencer.last_position > sequencer.sealed_frontier:
        sequencer.seal_batch()


def nuevo_sequencer(bundles):
    sequencer = Sequencer()
    for service in bundles:
        sequencer.register_service(service)
    return sequencer


def par_archival_selectivo(bundles, hosted, sequencer, parallel=False):
    """Un archival completo y un nodo selectivo que le pide los efectos."""
    archival = Node(1, sequencer, bundles, HostingProfile(archival=True), name='Z')

    def fuente(targets, start, end):
        archival.run_until(end)
        return serve_effects(archival, targets, start, end)

    selectivo = Node(
        2, sequencer, {s: bundles[s] for s in hosted}, HostingProfile(frozenset(hosted)),
        effect_source=fuente, parallel=parallel, name='X',
    )
    return archival, selectivo


@pytest.fixture
def token():
    return erc20.build('T', ALICE, balances={ALICE: 1000, BOB: 500})


@pytest.fixture
def two_dex_bundles():
    return dos_dex()


@pytest.fixture
def contadores():
    return {'CA': counter.build('CA'), 'CB': counter.build('CB', start=100)}


@pytest.fixture
def router_bundles():
    bundles = dos_dex()
    bundles['R'] = router.build('R', ['A', 'B'])
    return bundles


def red_upc(n, shares=None, seed=0, **kwargs):
    """SimNet con `n` nodos que alojan el servicio de demostración 'U'."""
    sim = SimNet(SimConfig(seed=seed), bundles={'U': upc_demo.build('U', **kwargs)})
    for i in range(n):
        share = shares[i] if shares else i + 1
        sim.spawn_node(
            HostingProfile(frozenset({'U'})), f"U{i + 1}",
            instance_init={'U': {'share': share, 'blob': b'blob'}},
        )
    return sim


@pytest.fixture
def data_dir(tmp_path):
    return tmp_path / 'data'

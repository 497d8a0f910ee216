import pytest
from jsonschema import ValidationError

from Lyquids import dex
from Lyquids.registro import construir, construir_todos, convertir_instancia
from Nodo.node import HostingProfile, Node
from tests.conftest import ALICE, BOB, CAROL, cargar_intents, intent, nuevo_sequencer


def ejecutar(bundles, intents):
    sequencer = nuevo_sequencer(bundles)
    cargar_intents(sequencer, intents)
    node = Node(1, sequencer, bundles, HostingProfile(archival=True))
    node.run_until(sequencer.sealed_frontier)
    return node


def test_erc20_allowance_y_mint(token):
    node = ejecutar({'T': token}, [
        intent(ALICE, 'T', 'approve', CAROL, 200),
        intent(CAROL, 'T', 'transfer_from', ALICE, BOB, 150),
        intent(ALICE, 'T', 'mint', CAROL, 25),
        intent(BOB, 'T', 'mint', BOB, 25),
    ])
    assert node.runtime.read_root('T', 'allowances')[(ALICE, CAROL)] == 50
    assert node.runtime.read_root('T', 'balances')[BOB] == 650
    assert node.runtime.read_root('T', 'total_supply') == 1525
    assert node.outcomes[4].error == 'not-owner'
    eventos = [e for e in node.outcomes[2].effects if e.kind == 'event']
    assert [(e.method, e.args) for e in eventos] == [('Transfer', ([ALICE, BOB, 150],))]


def test_erc20_vistas(token):
    node = ejecutar({'T': token}, [intent(ALICE, 'T', 'approve', BOB, 7)])
    runtime = node.runtime
    assert runtime.exec_view('T', 'balance_of', (ALICE,), BOB) == 1000
    assert runtime.exec_view('T', 'allowance', (ALICE, BOB), BOB) == 7
    assert runtime.exec_view('T', 'total', (), BOB) == 1500


@pytest.mark.parametrize('x,y,dx', [(1000, 1000, 100), (1000, 1000, 1), (7, 13, 5), (10 ** 6, 3, 999)])
def test_producto_constante_no_decrece(x, y, dx):
    dy = dex.salida(x, y, dx)
    assert (x + dx) * (y - dy) >= x * y


def test_salida_conocida():
    assert dex.salida(1000, 1000, 100) == 90
    assert dex.salida(1100, 910, 50) == 39


def test_dex_swap_y_vuelta(two_dex_bundles):
    node = ejecutar(two_dex_bundles, [
        intent(BOB, 'B', 'swap', 100),
        intent(BOB, 'B', 'swap_back', 90),
        intent(BOB, 'B', 'swap_back', 1),
        intent(ALICE, 'A', 'swap', 0),
    ])
    runtime = node.runtime
    assert node.outcomes[1].result == 90
    assert node.outcomes[2].result == 99
    assert node.outcomes[3].error == 'insufficient'
    assert node.outcomes[4].error == 'zero-input'
    assert runtime.read_root('C', 'balances')[BOB] == 299
    assert runtime.exec_view('B', 'reserves', (), BOB) == [1001, 1000]
    assert runtime.exec_view('A', 'quote', (100,), BOB) == 90


def test_router_encamina_y_rechaza(router_bundles):
    node = ejecutar(router_bundles, [
        intent(ALICE, 'R', 'route', 'A', 100),
        intent(ALICE, 'R', 'route', 'Q', 1),
    ])
    assert node.outcomes[1].result == 90
    assert node.runtime.read_root('A', 'credits')[ALICE] == 90
    assert node.outcomes[2].error == 'unknown-dex'
    assert node.runtime.exec_view('R', 'routed', (), ALICE) == 100


def test_registro_construye_desde_json():
    bundles = construir_todos([
        {'service': 'T', 'kind': 'erc20', 'params': {
            'owner': {'account': 'alice'},
            'balances': [[{'account': 'alice'}, 10]],
            'allowances': [[{'account': 'alice'}, {'service': 'D'}, 5]],
        }},
        {'service': 'D', 'kind': 'dex', 'params': {'token': 'T', 'reserve_token': 50}},
        {'service': 'K', 'kind': 'counter'},
    ])
    assert sorted(bundles) == ['D', 'K', 'T']
    assert bundles['D'].callees == frozenset({'T'})
    assert bundles['T'].kind == 'erc20'


def test_registro_errores():
    with pytest.raises(ValidationError):
        construir({'service': 'X', 'kind': 'bolsa'})
    with pytest.raises(ValueError):
        construir({'service': 'X', 'kind': 'dex', 'params': {}})


def test_instancia_desde_json():
    assert convertir_instancia({'U': {'share': 3, 'blob': {'bytes': 'cafe'}}}) == \
        {'U': {'share': 3, 'blob': b'\xca\xfe'}}
    assert convertir_instancia(None) == {}

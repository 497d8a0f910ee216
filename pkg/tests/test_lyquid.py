import pytest

from Comun.errores import (
    DuplicateName, GasExhausted, MethodError, NotHosted, UndeclaredCall, UnresolvedEffect,
)
from Lyquid.bundle import LyquidBundle, verificar_bundle
from Lyquid.contexto import GAS_CALL, GasMeter, NetworkContext, effects_to_lines
from Lyquid.runtime import Runtime
from Lyquid.valor import Address, decode, encode, json_a_valor, valor_a_json
from Lyquids import counter
from Secuencia.log import LogEntry
from tests.conftest import ALICE, BOB, CAROL, intent


def entrada(position, it):
    return LogEntry(position, it, 1)


def runtime_con(*bundles):
    runtime = Runtime()
    for bundle in bundles:
        runtime.deploy(bundle)
    return runtime


# ==================== VALORES ====================

def test_codificacion_canonica_de_mapas():
    a = {BOB: 2, ALICE: 1}
    b = {ALICE: 1, BOB: 2}
    assert encode(a) == encode(b)
    assert decode(encode([1, True, 'x', b'\x00', [ALICE]])) == [1, True, 'x', b'\x00', [ALICE]]


def test_valores_invalidos():
    with pytest.raises(ValueError):
        encode(-1)
    with pytest.raises(ValueError):
        encode(1.5)
    with pytest.raises(ValueError):
        decode(encode(1) + b'\x00')


def test_forma_json():
    assert json_a_valor({'account': 'alice'}) == ALICE
    assert json_a_valor({'service': 'A'}) == Address.for_service('A')
    assert valor_a_json(b'\xca\xfe') == {'bytes': 'cafe'}
    assert json_a_valor(valor_a_json({ALICE: [1, 2]})) == {ALICE: [1, 2]}
    assert valor_a_json(ALICE)['address'].startswith('0x')


# ==================== GAS ====================

def test_medidor_de_gas():
    meter = GasMeter(150)
    meter.charge(100)
    assert meter.remaining == 50
    with pytest.raises(GasExhausted):
        meter.charge(51)
    assert meter.used == 150


# ==================== BUNDLES ====================

def test_code_tag_estable_y_sensible_a_metodos(token):
    assert token.code_tag == token.code_tag
    otro = token.with_network_method('extra', lambda ctx: 1)
    assert otro.code_tag != token.code_tag


def test_nombres_duplicados(token):
    with pytest.raises(DuplicateName):
        token.with_network_method('transfer', lambda ctx: 1)
    repetido = LyquidBundle('X').with_root('network', 'a', 'u256', 0).with_root('network', 'a', 'u256', 0)
    exito, error = verificar_bundle(repetido)
    assert not exito
    assert isinstance(error, DuplicateName)


def test_inicializador_de_tipo_incorrecto():
    exito, error = verificar_bundle(LyquidBundle('X').with_root('network', 'a', 'u256', 'no'))
    assert not exito
    with pytest.raises(ValueError):
        Runtime().deploy(LyquidBundle('X').with_root('network', 'a', 'u256', 'no'))


def test_despliegue_duplicado(token):
    runtime = runtime_con(token)
    with pytest.raises(DuplicateName):
        runtime.deploy(token)


# ==================== CONTENEDORES ====================

def test_contenedores_sobre_el_espacio():
    def llenar(ctx):
        lista = ctx.network['lista']
        lista.append('a')
        lista.append([1, 2])
        lista.set(0, 'b')
        mapa = ctx.network['mapa']
        for i in (5, 1, 3):
            mapa.set(i, i * 10)
        mapa.delete(1)
        ctx.network['caja'].set({ALICE: True})
        ctx.network['flag'].set(True)
        return [lista.pop(), len(lista), mapa.keys()]

    bundle = (
        LyquidBundle('K')
        .with_root('network', 'lista', 'list', [])
        .with_root('network', 'mapa', 'map', {})
        .with_root('network', 'caja', 'value', [])
        .with_root('network', 'flag', 'bool', False)
        .with_network_method('llenar', llenar)
    )
    runtime = runtime_con(bundle)
    outcome = runtime.exec_network(entrada(1, intent(ALICE, 'K', 'llenar')))
    assert outcome.ok
    assert outcome.result == [[1, 2], 1, [3, 5]]
    assert runtime.read_root('K', 'lista') == ['b']
    assert runtime.read_root('K', 'mapa') == {3: 30, 5: 50}
    assert runtime.read_root('K', 'caja') == {ALICE: True}
    assert runtime.read_root('K', 'flag') is True


def test_tipo_incorrecto_en_raiz():
    bundle = LyquidBundle('K').with_root('network', 'n', 'u256', 0) \
        .with_network_method('romper', lambda ctx: ctx.network['n'].set('texto'))
    outcome = runtime_con(bundle).exec_network(entrada(1, intent(ALICE, 'K', 'romper')))
    assert outcome.error == 'type-mismatch'


# ==================== EJECUCIÓN DE RED ====================

def test_transferencia_confirmada(token):
    runtime = runtime_con(token)
    outcome = runtime.exec_network(entrada(1, intent(ALICE, 'T', 'transfer', BOB, 100)))
    assert outcome.ok
    assert outcome.result is True
    assert runtime.read_root('T', 'balances') == {ALICE: 900, BOB: 600}
    tipos = [e.kind for e in outcome.effects]
    assert tipos == ['event', 'state-write-summary']
    assert outcome.effects[-1].result >= 1


def test_fallo_revierte_todo(token):
    runtime = runtime_con(token)
    antes = runtime.network_digest('T')
    outcome = runtime.exec_network(entrada(1, intent(BOB, 'T', 'transfer', ALICE, 501)))
    assert outcome.status == 'failed'
    assert outcome.error == 'insufficient'
    assert runtime.network_digest('T') == antes


def test_metodo_inexistente(token):
    outcome = runtime_con(token).exec_network(entrada(1, intent(ALICE, 'T', 'nada')))
    assert outcome.error == 'method-not-found'


def test_destino_no_alojado(token):
    with pytest.raises(NotHosted):
        runtime_con(token).exec_network(entrada(1, intent(ALICE, 'D', 'swap', 1)))


def test_bucle_sin_cota_termina_por_gas():
    runtime = runtime_con(counter.build('C'))
    outcome = runtime.exec_network(entrada(1, intent(ALICE, 'C', 'spin', gas_limit=5000)))
    assert outcome.error == 'gas-exhausted'
    assert outcome.gas_used == 5000
    assert runtime.read_root('C', 'count') == 0


def test_gas_cero():
    outcome = runtime_con(counter.build('C')).exec_network(entrada(1, intent(ALICE, 'C', 'increment', gas_limit=0)))
    assert outcome.error == 'gas-exhausted'


def gloton(ctx):
    cuenta = ctx.network['count']
    cuenta.set(ctx.add(cuenta.get(), 7))
    try:
        while True:
            ctx.tick()
    except Exception:
        return 'sigo'


def test_agotamiento_atrapado_igual_falla():
    bundle = counter.build('C').with_network_method('gloton', gloton)
    runtime = runtime_con(bundle)
    outcome = runtime.exec_network(entrada(1, intent(ALICE, 'C', 'gloton', gas_limit=500)))
    assert outcome.status == 'failed'
    assert outcome.error == 'gas-exhausted'
    assert outcome.gas_used == 500
    assert runtime.read_root('C', 'count') == 0


def test_agotamiento_atrapado_en_llamada_interna_aborta():
    def delega(ctx):
        return ctx.call('C', 'gloton')

    bundle = LyquidBundle('W').with_network_method('delega', delega, {'C'})
    runtime = runtime_con(counter.build('C').with_network_method('gloton', gloton), bundle)
    outcome = runtime.exec_network(entrada(1, intent(ALICE, 'W', 'delega', gas_limit=800)))
    assert outcome.error == 'gas-exhausted'
    llamada = [e for e in outcome.effects if e.kind == 'inner-call'][0]
    assert llamada.error == 'gas-exhausted'
    assert runtime.read_root('C', 'count') == 0


def test_gas_cobrado_es_determinista():
    a = runtime_con(counter.build('C')).exec_network(entrada(1, intent(ALICE, 'C', 'increment', 2)))
    b = runtime_con(counter.build('C')).exec_network(entrada(1, intent(ALICE, 'C', 'increment', 2)))
    assert a.gas_used == b.gas_used
    assert a.gas_used > GAS_CALL


def test_resultado_nulo_es_unidad():
    bundle = LyquidBundle('K').with_network_method('nada', lambda ctx: None)
    assert runtime_con(bundle).exec_network(entrada(1, intent(ALICE, 'K', 'nada'))).result == []


def test_excepcion_de_python_es_fallo():
    bundle = LyquidBundle('K').with_network_method('boom', lambda ctx: 1 // 0)
    assert runtime_con(bundle).exec_network(entrada(1, intent(ALICE, 'K', 'boom'))).error == 'exception'


def test_contexto_de_red_no_expone_identidad_ni_instancia():
    bundle = (
        LyquidBundle('K')
        .with_network_method('nodo', lambda ctx: ctx.node_id)
        .with_network_method('instancia', lambda ctx: ctx.instance)
        .with_network_method('upc', lambda ctx: ctx.upc)
    )
    runtime = runtime_con(bundle)
    for i, metodo in enumerate(('nodo', 'instancia', 'upc'), start=1):
        assert runtime.exec_network(entrada(i, intent(ALICE, 'K', metodo))).error == 'exception'


@pytest.mark.parametrize('atributo', ['time', 'now', 'clock', 'random', 'rng', 'seed'])
def test_contexto_de_red_sin_reloj_ni_azar(atributo):
    bundle = LyquidBundle('K').with_network_method('mirar', lambda ctx: getattr(ctx, atributo))
    outcome = runtime_con(bundle).exec_network(entrada(1, intent(ALICE, 'K', 'mirar')))
    assert outcome.error == 'exception'
    assert atributo not in dir(NetworkContext)


def test_aritmetica_u256():
    bundle = (
        LyquidBundle('K')
        .with_network_method('resta', lambda ctx: ctx.sub(1, 2))
        .with_network_method('division', lambda ctx: ctx.div(1, 0))
        .with_network_method('suma', lambda ctx: ctx.add(2 ** 256 - 1, 1))
    )
    runtime = runtime_con(bundle)
    assert runtime.exec_network(entrada(1, intent(ALICE, 'K', 'resta'))).error == 'underflow'
    assert runtime.exec_network(entrada(2, intent(ALICE, 'K', 'division'))).error == 'division-by-zero'
    assert runtime.exec_network(entrada(3, intent(ALICE, 'K', 'suma'))).error == 'overflow'


# ==================== LLAMADAS INTERNAS ====================

def test_swap_ejecuta_el_token_en_linea(two_dex_bundles):
    runtime = runtime_con(*two_dex_bundles.values())
    outcome = runtime.exec_network(entrada(1, intent(BOB, 'A', 'swap', 100)))
    assert outcome.ok
    assert outcome.result == 90
    llamadas = [e for e in outcome.effects if e.kind == 'inner-call']
    assert len(llamadas) == 1
    llamada = llamadas[0]
    assert (llamada.source, llamada.target, llamada.method) == ('A', 'C', 'transfer_from')
    assert llamada.index == 0 and llamada.parent is None and llamada.span == 0
    assert llamada.result is True
    assert runtime.read_root('C', 'balances')[Address.for_service('A')] == 1100
    resumen = [e.source for e in outcome.effects if e.kind == 'state-write-summary']
    assert resumen == ['A', 'C']


def test_fallo_interno_aborta_la_entrada(two_dex_bundles):
    runtime = runtime_con(*two_dex_bundles.values())
    antes = (runtime.network_digest('A'), runtime.network_digest('C'))
    outcome = runtime.exec_network(entrada(1, intent(CAROL, 'A', 'swap', 10)))
    assert outcome.status == 'failed'
    assert outcome.error == 'allowance'
    llamada = [e for e in outcome.effects if e.kind == 'inner-call'][0]
    assert llamada.error == 'allowance'
    assert (runtime.network_digest('A'), runtime.network_digest('C')) == antes


def test_fallo_interno_atrapado_igual_aborta(two_dex_bundles):
    def atrapa(ctx):
        try:
            ctx.call('C', 'transfer', ALICE, 10 ** 9)
        except MethodError:
            pass
        return 'sigue'

    bundle = LyquidBundle('W').with_network_method('atrapa', atrapa, {'C'})
    runtime = runtime_con(two_dex_bundles['C'], bundle)
    outcome = runtime.exec_network(entrada(1, intent(ALICE, 'W', 'atrapa')))
    assert outcome.status == 'failed'
    assert outcome.error == 'insufficient'


def test_llamada_fuera_del_conjunto_permitido(two_dex_bundles):
    runtime = runtime_con(*two_dex_bundles.values())
    with pytest.raises(UndeclaredCall):
        runtime.exec_network(entrada(1, intent(BOB, 'A', 'swap', 100)), allowed={'A'})


def test_servicio_no_alojado_sin_registros(two_dex_bundles):
    runtime = runtime_con(two_dex_bundles['A'])
    with pytest.raises(UnresolvedEffect):
        runtime.exec_network(entrada(1, intent(BOB, 'A', 'swap', 100)))
    assert runtime.read_root('A', 'reserve_token') == 1000


def test_traza_de_efectos_en_lineas(two_dex_bundles):
    runtime = runtime_con(*two_dex_bundles.values())
    outcome = runtime.exec_network(entrada(1, intent(BOB, 'A', 'swap', 100)))
    lineas = effects_to_lines(outcome.effects).splitlines()
    assert len(lineas) == len(outcome.effects)
    assert '"kind": "inner-call"' in lineas[0]


# ==================== VISTAS E INSTANCIA ====================

def test_vista_no_escribe(token):
    runtime = runtime_con(token)
    assert runtime.exec_view('T', 'balance_of', (ALICE,), BOB) == 1000
    with pytest.raises(MethodError) as excinfo:
        runtime.exec_view('T', 'transfer', (BOB, 1), ALICE)
    assert excinfo.value.code == 'region-violation'


def test_metodos_de_instancia(token):
    runtime = runtime_con(token)
    digest = runtime.network_digest('T')
    assert runtime.exec_instance('T', 'record_transaction', ('a',), ALICE) == 1
    assert runtime.exec_instance('T', 'record_transaction', ('b',), ALICE) == 2
    assert runtime.exec_instance('T', 'local_count', (), ALICE) == 2
    assert runtime.network_digest('T') == digest
    with pytest.raises(MethodError) as excinfo:
        runtime.exec_instance('T', 'burn_locally', (1,), ALICE)
    assert excinfo.value.code == 'region-violation'
    assert runtime.read_root('T', 'total_supply') == 1500


def test_inicializacion_de_instancia_por_nodo():
    runtime = Runtime()
    runtime.deploy(counter.build('C'), {'hits': 41})
    assert runtime.exec_instance('C', 'hit', (), ALICE) == 42
    assert runtime.read_root('C', 'hits', region='instance') == 42


def test_reapertura_desde_disco(tmp_path, token):
    runtime = Runtime(tmp_path)
    runtime.deploy(token)
    runtime.exec_network(entrada(1, intent(ALICE, 'T', 'transfer', BOB, 1)))
    runtime.spaces['T'].persist()

    reabierto = Runtime(tmp_path)
    reabierto.deploy(token)
    assert reabierto.read_root('T', 'balances') == {ALICE: 999, BOB: 501}

"""
Propiedades sobre muchas semillas: equivalencia de destino entre réplicas
selectivas y completas, snapshots contra reejecución, disponibilidad UPC y
conservación de saldos.
"""
import itertools
import random
from pathlib import Path

import pytest

from Comun.errores import QuorumNotMet
from Escenarios.aleatorio import generar
from Escenarios.escenario import cargar, validar
from Escenarios.run import ejecutar
from Lyquid.valor import Address
from Lyquids import erc20
from Memoria.espacio import NETWORK, PAGE_SIZE, MemorySpace
from Nodo.node import HostingProfile, Node
from Simulacion.simnet import Fault
from Upc.call import Aggregator, UpcCall
from Upc.invoke import upc_invoke
from tests.conftest import intent, nuevo_sequencer, red_upc

DATA = Path(__file__).resolve().parent.parent / 'Escenarios' / 'data'


@pytest.mark.parametrize('seed', range(100))
def test_equivalencia_de_destino_aleatoria(seed):
    resultado = ejecutar(validar(generar(seed)))
    fallidas = [a for a in resultado.report['assertions'] if not a['passed']]
    assert resultado.passed, fallidas


# ==================== SNAPSHOTS ====================

VENTANA = 4 * PAGE_SIZE
BASE = NETWORK.start + 0x20000


@pytest.mark.parametrize('seed', range(50))
def test_snapshots_contra_reejecucion(seed):
    rng = random.Random(seed)
    space = MemorySpace.open('P')
    modelo = bytearray(VENTANA)
    pila = []
    tomados = []
    position = 0

    for _ in range(rng.randint(20, 80)):
        op = rng.random()
        if op < 0.5:
            offset = rng.randrange(VENTANA - 16)
            dato = rng.randbytes(rng.randint(1, 16))
            with space.sequenced():
                space.write(BASE + offset, dato)
            modelo[offset:offset + len(dato)] = dato
        elif op < 0.65:
            space.begin()
            pila.append(bytes(modelo))
        elif op < 0.8 and pila:
            if rng.random() < 0.5:
                space.rollback()
                modelo[:] = pila.pop()
            else:
                space.commit()
                pila.pop()
        elif not pila:
            position += rng.randint(1, 3)
            tomados.append((space.snapshot(position), bytes(modelo)))

    while pila:
        space.commit()
        pila.pop()
    assert space.read(BASE, VENTANA) == bytes(modelo)
    for snap, esperado in tomados:
        assert space.read_at(snap, BASE, VENTANA) == esperado
        assert space.materialize(snap).read(BASE, VENTANA) == esperado


# ==================== UPC ====================

@pytest.mark.parametrize('n', [3, 4, 5])
def test_disponibilidad_con_cualquier_subconjunto_caido(n):
    for tamanio in range(n + 1):
        for caidos in itertools.combinations(range(1, n + 1), tamanio):
            sim = red_upc(n)
            for node_id in caidos:
                sim.inject(Fault.crash(node_id), 0)
            sim.run_until(0)
            vivos = [i for i in range(1, n + 1) if i not in caidos]
            fetch = UpcCall('U', 'fetch')
            shares = UpcCall('U', 'get_share', aggregator=Aggregator('threshold_shares', 'sum', k=max(1, len(vivos))))
            origen = vivos[0] if vivos else 1
            if vivos:
                assert upc_invoke(sim, origen, fetch) == b'blob'
                assert upc_invoke(sim, origen, shares) == sum(vivos)
            else:
                with pytest.raises(QuorumNotMet):
                    upc_invoke(sim, origen, fetch)


# ==================== CONSERVACIÓN ====================

CUENTAS = [Address.for_account(nombre) for nombre in ('alice', 'bob', 'carol', 'dave')]


@pytest.mark.parametrize('seed', range(3))
def test_conservacion_erc20_tras_cada_entrada(seed):
    rng = random.Random(seed)
    token = erc20.build('T', CUENTAS[0], balances={c: rng.randint(0, 300) for c in CUENTAS})
    sequencer = nuevo_sequencer({'T': token})
    for _ in range(200):
        caller, otro, tercero = rng.sample(CUENTAS, 3)
        opcion = rng.random()
        if opcion < 0.6:
            sequencer.submit(intent(caller, 'T', 'transfer', otro, rng.randint(0, 150)))
        elif opcion < 0.75:
            sequencer.submit(intent(caller, 'T', 'approve', otro, rng.randint(0, 100)))
        elif opcion < 0.95:
            sequencer.submit(intent(otro, 'T', 'transfer_from', caller, tercero, rng.randint(0, 100)))
        else:
            sequencer.submit(intent(rng.choice(CUENTAS), 'T', 'mint', otro, rng.randint(1, 50)))
        if rng.random() < 0.1:
            sequencer.seal_batch()
    sequencer.seal_batch()

    node = Node(1, sequencer, {'T': token}, HostingProfile(archival=True))
    for position in range(1, 201):
        node.run_until(position)
        saldos = node.runtime.read_root('T', 'balances')
        assert sum(saldos.values()) == node.runtime.read_root('T', 'total_supply')


# ==================== DETERMINISMO ====================

@pytest.mark.parametrize('nombre', ['two_dex.scn', 'parallel_batch.scn'])
def test_estado_final_igual_en_toda_semilla(nombre):
    escenario = cargar(DATA / nombre)
    digests = set()
    for seed in range(10):
        resultado = ejecutar(escenario, seed=seed)
        assert resultado.passed, seed
        digests.add(repr(resultado.report['digests']))
    assert len(digests) == 1


def test_misma_semilla_misma_traza():
    escenario = cargar(DATA / 'upc_nested.scn')
    a, b = ejecutar(escenario, seed=5), ejecutar(escenario, seed=5)
    assert a.sim.trace_lines() == b.sim.trace_lines()
    assert a.report == b.report

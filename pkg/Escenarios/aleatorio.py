"""
Generador de escenarios aleatorios sembrados: tokens, DEXes, un router y
contadores repartidos entre réplicas selectivas, con aserciones de digest
contra el oráculo.
"""
import random

CUENTAS = ('alice', 'bob', 'carol', 'dave', 'erin')
APROBACION = 10 ** 6


def _cuenta(nombre):
    return {'account': nombre}


def _servicio(nombre):
    return {'service': nombre}


def _desplegar(rng, max_servicios):
    tokens = [f"T{i}" for i in range(rng.randint(1, 2))]
    dexes = [f"D{i}" for i in range(rng.randint(0, 2))]
    pool = {dex: rng.choice(tokens) for dex in dexes}
    router = ['R'] if dexes and rng.random() < 0.5 else []
    libres = max_servicios - len(tokens) - len(dexes) - len(router)
    counters = [f"C{i}" for i in range(rng.randint(0, max(0, min(libres, 2))))]

    deployments = []
    for token in tokens:
        balances = [[_cuenta(c), rng.randint(50, 500)] for c in CUENTAS]
        allowances = []
        for dex, suyo in sorted(pool.items()):
            if suyo != token:
                continue
            balances.append([_servicio(dex), 1000])
            allowances += [[_cuenta(c), _servicio(dex), APROBACION] for c in CUENTAS]
        deployments.append({'service': token, 'kind': 'erc20', 'params': {
            'owner': _cuenta('alice'), 'balances': balances, 'allowances': allowances,
        }})
    for dex in dexes:
        deployments.append({'service': dex, 'kind': 'dex', 'params': {
            'token': pool[dex], 'reserve_token': 1000, 'reserve_credit': 1000,
        }})
    for nombre in router:
        deployments.append({'service': nombre, 'kind': 'router', 'params': {'dexes': dexes}})
    for counter in counters:
        deployments.append({'service': counter, 'kind': 'counter', 'params': {'start': rng.randint(0, 9)}})
    return deployments, tokens, dexes, router, counters


def _intencion(rng, tokens, dexes, router, counters):
    caller = rng.choice(CUENTAS)
    opciones = ['token'] * 3 + ['dex'] * (2 if dexes else 0) + ['router'] * len(router) + ['counter'] * len(counters)
    tipo = rng.choice(opciones)
    if tipo == 'token':
        return caller, rng.choice(tokens), 'transfer', [_cuenta(rng.choice(CUENTAS)), rng.randint(0, 200)], None
    if tipo == 'dex':
        dex = rng.choice(dexes)
        metodo = rng.choice(('swap', 'swap', 'swap_back', 'transfer_credit'))
        if metodo == 'swap':
            return caller, dex, metodo, [rng.randint(1, 100)], None
        if metodo == 'swap_back':
            return caller, dex, metodo, [rng.randint(1, 50)], None
        return caller, dex, metodo, [_cuenta(rng.choice(CUENTAS)), rng.randint(1, 30)], None
    if tipo == 'router':
        return caller, router[0], 'route', [rng.choice(dexes), rng.randint(1, 60)], None
    counter = rng.choice(counters)
    if rng.random() < 0.1:
        return caller, counter, 'spin', [], 5000
    return caller, counter, 'increment', [rng.randint(1, 5)], None


def generar(seed, max_servicios=6, max_intents=50):
    """
    Escenario válido y reproducible para la semilla dada
    """
    rng = random.Random(seed)
    deployments, tokens, dexes, router, counters = _desplegar(rng, max_servicios)
    servicios = [d['service'] for d in deployments]

    intents = []
    for i in range(rng.randint(5, max_intents)):
        caller, service, method, args, gas = _intencion(rng, tokens, dexes, router, counters)
        intent = {'step': 1 + i // 3, 'caller': _cuenta(caller), 'service': service,
                  'method': method, 'args': args}
        if gas is not None:
            intent['gas_limit'] = gas
        intents.append(intent)

    nodes = [{'name': 'Z', 'archival': True}]
    for i in range(rng.randint(2, 3)):
        hosted = sorted(rng.sample(servicios, rng.randint(1, len(servicios))))
        nodes.append({'name': f"N{i}", 'hosted': hosted, 'archival_peer': 'Z',
                      'parallel': rng.random() < 0.5})

    assertions = [
        {'kind': 'digest', 'node': nodo['name']} for nodo in nodes
    ] + [
        {'kind': 'conservation', 'node': 'Z', 'service': token} for token in tokens
    ]
    return {
        'name': f"random-{seed}",
        'seed': seed,
        'deployments': deployments,
        'nodes': nodes,
        'intents': intents,
        'seal_every': 2,
        'assertions': assertions,
    }

"""
Registro de tipos de Lyquid desplegables desde escenarios y configs de nodo.
"""
from jsonschema import validate

from Lyquid.valor import json_a_valor
from Lyquids import counter, dex, erc20, router, upc_demo

KINDS = {
    erc20.KIND: erc20,
    dex.KIND: dex,
    router.KIND: router,
    counter.KIND: counter,
    upc_demo.KIND: upc_demo,
}

DEPLOYMENT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "Deployment",
    "type": "object",
    "properties": {
        "service": {"type": "string", "minLength": 1, "maxLength": 24},
        "kind": {"type": "string", "enum": sorted(KINDS)},
        "params": {"type": "object"}
    },
    "required": ["service", "kind"],
    "additionalProperties": False
}


def _pares(lista):
    return {json_a_valor(k): json_a_valor(v) for k, v in lista}


def convertir_params(kind, params):
    """
    Convierte los parámetros JSON de un despliegue a argumentos de `build`
    """
    params = dict(params)
    if kind == 'erc20':
        return {
            'owner': json_a_valor(params.get('owner', {'account': 'owner'})),
            'balances': _pares(params.get('balances', [])),
            'allowances': [tuple(json_a_valor(x) for x in fila) for fila in params.get('allowances', [])],
        }
    if kind == 'dex':
        return {
            'token': params['token'],
            'reserve_token': params.get('reserve_token', 1000),
            'reserve_credit': params.get('reserve_credit', 1000),
            'credits': _pares(params.get('credits', [])),
        }
    if kind == 'router':
        return {'dexes': list(params['dexes'])}
    if kind == 'counter':
        return {'start': params.get('start', 0)}
    return {
        'members': [json_a_valor(m) for m in params.get('members', [])],
        'quorum': params.get('quorum', 1),
        'blob_digest': params.get('blob_digest', ''),
    }


def construir(deployment):
    """
    Bundle listo para desplegar a partir de su descripción JSON
    """
    validate(instance=deployment, schema=DEPLOYMENT_SCHEMA)
    kind = deployment['kind']
    try:
        argumentos = convertir_params(kind, deployment.get('params', {}))
    except KeyError as e:
        raise ValueError(f"Falta el parámetro {e} para {kind}") from None
    return KINDS[kind].build(deployment['service'], **argumentos)


def construir_todos(deployments):
    return {d['service']: construir(d) for d in deployments}


def convertir_instancia(instancia):
    """
    {servicio: {raíz: valor JSON}} → {servicio: {raíz: Value}}
    """
    return {
        service: {root: json_a_valor(valor) for root, valor in roots.items()}
        for service, roots in (instancia or {}).items()
    }

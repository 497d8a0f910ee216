"""
Archivos de escenario (.scn): JSON con pasos explícitos.
"""
import json
from pathlib import Path

from jsonschema import validate

from Comun import config
from Lyquid.valor import VALOR_SCHEMA, Address, json_a_valor
from Lyquids.registro import DEPLOYMENT_SCHEMA
from Secuencia.log import CallIntent

ASSERTION_KINDS = ('root', 'digest', 'outcome', 'effect', 'call', 'conservation', 'frontier', 'no_bundle')

_VALOR = {"$ref": "#/definitions/valor"}

SCENARIO_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "Scenario",
    "type": "object",
    "definitions": VALOR_SCHEMA["definitions"],
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "delay": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "step_limit": {"type": "integer", "minimum": 1},
        "poll_interval": {"type": "integer", "minimum": 1},
        "deployments": {"type": "array", "items": DEPLOYMENT_SCHEMA},
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "hosted": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
                    "archival": {"type": "boolean"},
                    "archival_peer": {"type": "string"},
                    "parallel": {"type": "boolean"},
                    "instance": {"type": "object", "additionalProperties": {"type": "object"}}
                },
                "required": ["name"],
                "additionalProperties": False
            }
        },
        "intents": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "step": {"type": "integer", "minimum": 0},
                    "caller": _VALOR,
                    "service": {"type": "string", "minLength": 1},
                    "method": {"type": "string", "minLength": 1},
                    "args": {"type": "array", "items": _VALOR},
                    "gas_limit": {"type": "integer", "minimum": 0}
                },
                "required": ["step", "caller", "service", "method"],
                "additionalProperties": False
            }
        },
        "seals": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "seal_every": {"type": "integer", "minimum": 1},
        "calls": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "step": {"type": "integer", "minimum": 0},
                    "node": {"type": "string"},
                    "label": {"type": "string", "minLength": 1},
                    "kind": {"type": "string", "enum": ["send", "call"]},
                    "service": {"type": "string"},
                    "method": {"type": "string"},
                    "args": {"type": "array", "items": _VALOR},
                    "caller": _VALOR,
                    "gas_limit": {"type": "integer", "minimum": 0}
                },
                "required": ["step", "node", "label", "service", "method"],
                "additionalProperties": False
            }
        },
        "faults": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "step": {"type": "integer", "minimum": 0},
                    "kind": {"type": "string", "enum": ["crash", "recover", "partition", "heal"]},
                    "node": {"type": "string"},
                    "nodes": {"type": "array", "items": {"type": "string"}},
                    "other": {"type": "array", "items": {"type": "string"}}
                },
                "required": ["step", "kind"],
                "additionalProperties": False
            }
        },
        "assertions": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "kind": {"type": "string", "enum": list(ASSERTION_KINDS)},
                    "node": {"type": "string"},
                    "service": {"type": "string"},
                    "root": {"type": "string"},
                    "key": _VALOR,
                    "expected": {},
                    "position": {"type": "integer", "minimum": 1},
                    "status": {"type": "string"},
                    "error": {"type": "string"},
                    "target": {"type": "string"},
                    "method": {"type": "string"},
                    "label": {"type": "string"},
                    "equals": {"type": "integer"},
                    "max": {"type": "integer"},
                    "min": {"type": "integer"}
                },
                "required": ["kind"],
                "additionalProperties": False
            }
        }
    },
    "required": ["name"],
    "additionalProperties": False
}


def verificar_escenario(escenario):
    """
    Verifica referencias cruzadas: servicios desplegados y nodos declarados
    Returns: (bool, str) - (éxito, mensaje de error)
    """
    servicios = {d['service'] for d in escenario.get('deployments', [])}
    if len(servicios) != len(escenario.get('deployments', [])):
        return False, "Servicio desplegado dos veces"
    nodos = [n['name'] for n in escenario.get('nodes', [])]
    if len(set(nodos)) != len(nodos):
        return False, "Nombre de nodo repetido"
    for nodo in escenario.get('nodes', []):
        faltantes = set(nodo.get('hosted', [])) - servicios
        if faltantes:
            return False, f"El nodo {nodo['name']} aloja servicios no desplegados: {sorted(faltantes)}"
        if not nodo.get('archival') and not nodo.get('hosted'):
            return False, f"El nodo selectivo {nodo['name']} no aloja nada"
        if nodo.get('archival_peer') and nodo['archival_peer'] not in nodos:
            return False, f"Peer archival desconocido: {nodo['archival_peer']}"
    for intent in escenario.get('intents', []):
        if intent['service'] not in servicios:
            return False, f"Intención hacia un servicio no desplegado: {intent['service']}"
    for seccion in ('calls', 'faults', 'assertions'):
        for item in escenario.get(seccion, []):
            for nombre in [item.get('node')] + item.get('nodes', []) + item.get('other', []):
                if nombre is not None and nombre not in nodos:
                    return False, f"{seccion}: nodo desconocido {nombre}"
    return True, None


def cargar(path):
    """
    Lee, valida y verifica un escenario; errores de formato son ValueError
    """
    try:
        escenario = json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as e:
        raise ValueError(f"No se pudo leer el escenario {path}: {e}") from None
    return validar(escenario)


def validar(escenario):
    validate(instance=escenario, schema=SCENARIO_SCHEMA)
    exito, error_msg = verificar_escenario(escenario)
    if not exito:
        raise ValueError(error_msg)
    return escenario


def convertir_intent(intent):
    caller = json_a_valor(intent['caller'])
    if not isinstance(caller, Address):
        raise ValueError(f"El caller debe ser una dirección: {intent['caller']!r}")
    return CallIntent(
        caller, intent['service'], intent['method'],
        tuple(json_a_valor(a) for a in intent.get('args', [])),
        intent.get('gas_limit', config.DEFAULT_GAS),
    )


def intents_ordenados(escenario):
    """Intenciones en orden (paso, índice en el archivo)."""
    indexadas = sorted(enumerate(escenario.get('intents', [])), key=lambda par: (par[1]['step'], par[0]))
    return [(intent['step'], convertir_intent(intent)) for _i, intent in indexadas]


def envios(escenario):
    """Llamadas de gateway `send`: terminan como intenciones en el log."""
    return [c for c in escenario.get('calls', []) if c.get('kind', 'call') == 'send']


def convertir_envio(llamada):
    return convertir_intent({'caller': {'account': 'anonymous'}, **llamada})


def intents_con_envios(escenario):
    """
    Intenciones y envíos del gateway en el orden en que llegarían con la
    demora mínima; a igual paso, las intenciones directas primero
    """
    minimo = tuple(escenario.get('delay', (1, 3)))[0]
    claves = [((i['step'], 0, n), convertir_intent(i)) for n, i in enumerate(escenario.get('intents', []))]
    claves += [((c['step'] + minimo, 1, n), convertir_envio(c)) for n, c in enumerate(envios(escenario))]
    return [intent for _clave, intent in sorted(claves, key=lambda par: par[0])]


def pasos_de_sello(escenario):
    """
    Pasos en que se sella: explícitos, periódicos, y siempre uno tras la
    última intención para que todo quede sellado. Un envío del gateway se
    sella un paso después de su demora máxima de entrega.
    """
    maximo = tuple(escenario.get('delay', (1, 3)))[1]
    finales = [i['step'] for i in escenario.get('intents', [])]
    finales += [c['step'] + maximo + 1 for c in envios(escenario)]
    if not finales:
        return []
    ultimo = max(finales)
    pasos = set(escenario.get('seals', []))
    cada = escenario.get('seal_every')
    if cada:
        pasos |= set(range(cada, ultimo + cada, cada))
    pasos.add(ultimo)
    return sorted(pasos)

"""
Gateway de un nodo: `send` reenvía una intención al secuenciador; `call`
ejecuta localmente un método de instancia, un handler UPC o una vista de red.
"""
from jsonschema import validate

from Comun import config
from Comun.errores import InvalidIntent, MethodNotFound, NotHosted
from Comun.logs import get_logger
from Comun.respuestas import parsear_body, respuesta, respuesta_error
from Lyquid.valor import VALOR_SCHEMA, Address, json_a_valor, valor_a_json
from Nodo.config import cargar_nodo
from Secuencia.log import CallIntent

logger = get_logger(__name__)

GATEWAY_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "GatewayRequest",
    "type": "object",
    "definitions": VALOR_SCHEMA["definitions"],
    "properties": {
        "kind": {"type": "string", "enum": ["send", "call"]},
        "service": {"type": "string", "minLength": 1},
        "method": {"type": "string", "minLength": 1},
        "args": {"type": "array", "items": {"$ref": "#/definitions/valor"}},
        "caller": {"$ref": "#/definitions/valor"},
        "gas_limit": {"type": "integer", "minimum": 0}
    },
    "required": ["kind", "service", "method"],
    "additionalProperties": False
}


def convertir_caller(obj):
    """
    Convierte el caller JSON a Address (acepta azúcar account/service)
    """
    caller = json_a_valor(obj)
    if not isinstance(caller, Address):
        raise InvalidIntent(f"El caller debe ser una dirección, se recibió {obj!r}")
    return caller


def gateway_call(node, request, submit=None):
    """
    Atiende una petición de gateway contra `node`
    Returns: dict - cuerpo JSON de la respuesta
    """
    validate(instance=request, schema=GATEWAY_SCHEMA)
    caller = convertir_caller(request.get('caller', {'account': 'anonymous'}))
    args = tuple(json_a_valor(a) for a in request.get('args', []))
    service = request['service']
    method = request['method']

    if request['kind'] == 'send':
        intent = CallIntent(caller, service, method, args,
                            request.get('gas_limit', config.DEFAULT_GAS))
        position = (submit or node.sequencer.submit)(intent)
        return {'position': position}

    if not node.runtime.hosts(service):
        raise NotHosted(f"El nodo {node.name} no aloja '{service}'")
    bundle = node.runtime.bundles[service]
    runtime = node.runtime
    if method in bundle.instance_methods:
        resultado = runtime.exec_instance(service, method, args, caller, node.node_id, node.upc)
    elif method in bundle.upc_handlers:
        resultado = runtime.exec_handler(service, method, args, caller, node.node_id, node.upc)
    elif method in bundle.network_methods:
        resultado = runtime.exec_view(service, method, args, caller, node.position)
    else:
        raise MethodNotFound(f"{service} no tiene el método '{method}'")
    return {'result': valor_a_json(resultado), 'position': node.position}


def handler(event, context):
    """
    Lambda handler para el gateway del nodo configurado en LYQUOR_NODE_CONFIG
    """
    try:
        request = parsear_body(event)
        validate(instance=request, schema=GATEWAY_SCHEMA)
        if not config.NODE_CONFIG:
            raise ValueError("LYQUOR_NODE_CONFIG no está definido")
        node = cargar_nodo(config.NODE_CONFIG)
        return respuesta(200, gateway_call(node, request))
    except Exception as e:
        logger.error("Error en gateway: %s", e)
        return respuesta_error(e)

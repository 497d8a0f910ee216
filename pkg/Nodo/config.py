"""
Archivo de configuración de un nodo (JSON validado con jsonschema).
"""
import json
from pathlib import Path

from jsonschema import validate

from Comun.logs import get_logger
from Lyquids.registro import DEPLOYMENT_SCHEMA, construir_todos, convertir_instancia
from Nodo.node import HostingProfile, Node
from Secuencia.log import Sequencer

logger = get_logger(__name__)

NODE_CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "NodeConfig",
    "type": "object",
    "properties": {
        "node_id": {"type": "integer", "minimum": 1},
        "name": {"type": "string", "minLength": 1},
        "hosted": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
        "archival": {"type": "boolean"},
        "archival_peer": {"type": ["string", "integer", "null"]},
        "data_dir": {"type": "string"},
        "log_dir": {"type": "string"},
        "poll_interval": {"type": "integer", "minimum": 1},
        "parallel": {"type": "boolean"},
        "deployments": {"type": "array", "items": DEPLOYMENT_SCHEMA},
        "instance": {"type": "object", "additionalProperties": {"type": "object"}}
    },
    "required": ["node_id", "deployments"],
    "additionalProperties": False
}


def verificar_config(datos):
    """
    Verifica que un nodo no archival declare qué aloja
    Returns: (bool, str) - (éxito, mensaje de error)
    """
    if not datos.get('archival') and not datos.get('hosted'):
        return False, "Un nodo selectivo debe declarar 'hosted'"
    desplegados = {d['service'] for d in datos['deployments']}
    faltantes = set(datos.get('hosted', [])) - desplegados
    if faltantes:
        return False, f"Servicios alojados sin despliegue: {sorted(faltantes)}"
    return True, None


def construir_nodo(datos, sequencer=None, effect_source=None):
    """
    Nodo a partir de una config ya leída
    """
    validate(instance=datos, schema=NODE_CONFIG_SCHEMA)
    exito, error_msg = verificar_config(datos)
    if not exito:
        raise ValueError(error_msg)

    bundles = construir_todos(datos['deployments'])
    if sequencer is None:
        log_dir = datos.get('log_dir') or (Path(datos['data_dir']) / 'log' if 'data_dir' in datos else None)
        sequencer = Sequencer(log_dir)
    for service in sorted(bundles):
        sequencer.register_service(service)
    archival = datos.get('archival', False)
    profile = HostingProfile(frozenset(datos.get('hosted', [])), archival)
    if not archival:
        bundles = {s: b for s, b in bundles.items() if s in profile.hosted}
    return Node(
        datos['node_id'], sequencer, bundles, profile,
        effect_source=effect_source,
        data_dir=datos.get('data_dir'),
        parallel=datos.get('parallel', False),
        instance_init=convertir_instancia(datos.get('instance')),
        name=datos.get('name'),
    )


def cargar_nodo(path):
    datos = json.loads(Path(path).read_text(encoding='utf-8'))
    logger.info("Cargando nodo desde %s", path)
    return construir_nodo(datos)

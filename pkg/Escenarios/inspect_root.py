"""
Lectura de una raíz de red desde la imagen persistida de un nodo.
"""
from pathlib import Path

from Comun import config
from Comun.errores import StoreUnavailable
from Comun.logs import get_logger
from Comun.respuestas import parsear_body, respuesta, respuesta_error
from Lyquid.estructuras import Raices
from Lyquid.valor import valor_a_json
from Memoria.espacio import IMAGE_NAME, MemorySpace

logger = get_logger(__name__)


def inspeccionar(directorio, service, root, at=None):
    """
    Valor de `root` en la imagen de `directorio/service`, o en el snapshot
    de la posición `at`
    """
    location = Path(directorio) / service
    if not (location / IMAGE_NAME).exists():
        raise StoreUnavailable(f"No hay imagen de '{service}' en {directorio}")
    space = MemorySpace.open(service, location)
    if at is not None:
        space = space.materialize(space.snapshot_at(at))
    return Raices(space, 'network')[root].valor()


def handler(event, context):
    """
    Lambda handler para inspeccionar una raíz (dir por defecto LYQUOR_DATA_DIR)
    """
    try:
        body = parsear_body(event)
        valor = inspeccionar(body.get('dir', config.DATA_DIR), body['service'], body['root'], body.get('at'))
        return respuesta(200, {'service': body['service'], 'root': body['root'], 'value': valor_a_json(valor)})
    except Exception as e:
        logger.error("Error inspeccionando: %s", e)
        return respuesta_error(e)

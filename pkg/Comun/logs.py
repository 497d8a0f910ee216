import logging
import os


def configurar_logging(level=None):
    """
    Configura el logger raíz una sola vez (nivel desde LYQUOR_LOG_LEVEL)
    """
    nivel = level or os.environ.get('LYQUOR_LOG_LEVEL', 'WARNING')
    logging.basicConfig(
        level=getattr(logging, str(nivel).upper(), logging.WARNING),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )


def get_logger(name):
    return logging.getLogger(name)

import os

# Directorio de datos por defecto (inspect, gateway)
DATA_DIR = os.environ.get('LYQUOR_DATA_DIR', './lyquor-data')

# Límite global de gas por intención
MAX_GAS = int(os.environ.get('LYQUOR_MAX_GAS', '10000000'))

# Gas por defecto cuando un escenario no lo indica
DEFAULT_GAS = int(os.environ.get('LYQUOR_DEFAULT_GAS', '1000000'))

# Cota de pasos para métodos de instancia y handlers UPC
INSTANCE_GAS = int(os.environ.get('LYQUOR_INSTANCE_GAS', '50000000'))

# Profundidad máxima de UPC anidadas
UPC_MAX_DEPTH = int(os.environ.get('LYQUOR_UPC_MAX_DEPTH', '4'))

# Archivo de configuración del nodo que atiende el gateway
NODE_CONFIG = os.environ.get('LYQUOR_NODE_CONFIG')

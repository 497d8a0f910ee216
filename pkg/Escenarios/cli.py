"""
Línea de comandos:

    lyquor run <escenario.scn> [--seed N] [--out DIR]
    lyquor oracle <escenario.scn>
    lyquor inspect <dir> <servicio> <raíz> [--at POS]
"""
import argparse
import json
import sys

from jsonschema import ValidationError

from Comun import config
from Comun.errores import LyquorError
from Comun.logs import configurar_logging, get_logger
from Escenarios.inspect_root import inspeccionar
from Escenarios.oracle import cli_oracle
from Escenarios.run import EXIT_INVALID, cli_run
from Lyquid.valor import valor_a_json

logger = get_logger(__name__)


def construir_parser():
    parser = argparse.ArgumentParser(prog='lyquor', description='Prototipo de escritorio de Lyquor')
    parser.add_argument('--log-level', default=None, help='nivel de logging (LYQUOR_LOG_LEVEL)')
    sub = parser.add_subparsers(dest='comando', required=True)

    run = sub.add_parser('run', help='corre un escenario en la red simulada')
    run.add_argument('scenario')
    run.add_argument('--seed', type=int, default=None)
    run.add_argument('--out', default=config.DATA_DIR)

    oracle = sub.add_parser('oracle', help='vuelca el estado de la réplica completa')
    oracle.add_argument('scenario')

    inspect = sub.add_parser('inspect', help='lee una raíz de una imagen persistida')
    inspect.add_argument('dir')
    inspect.add_argument('service')
    inspect.add_argument('root')
    inspect.add_argument('--at', type=int, default=None)
    return parser


def main(argv=None):
    args = construir_parser().parse_args(argv)
    configurar_logging(args.log_level)

    if args.comando == 'run':
        return cli_run(args.scenario, args.seed, args.out)
    try:
        if args.comando == 'oracle':
            salida = cli_oracle(args.scenario)
        else:
            salida = valor_a_json(inspeccionar(args.dir, args.service, args.root, args.at))
    except (ValueError, ValidationError, LyquorError) as e:
        logger.error("%s: %s", args.comando, getattr(e, 'message', e))
        return EXIT_INVALID
    print(json.dumps(salida, indent=2, sort_keys=True))
    return 0


if __name__ == '__main__':
    sys.exit(main())

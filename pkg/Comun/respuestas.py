import json

from jsonschema import ValidationError

from Comun.errores import LyquorError


def respuesta(status_code, body):
    """
    Arma la respuesta estilo API Gateway que devuelven todos los handlers
    """
    return {
        'statusCode': status_code,
        'headers': {
            'Content-Type': 'application/json',
            'Access-Control-Allow-Origin': '*'
        },
        'body': json.dumps(body, sort_keys=True)
    }


def respuesta_error(e):
    """
    Traduce una excepción a su respuesta (400 validación, status del error, 500)
    """
    if isinstance(e, ValidationError):
        return respuesta(400, {
            'error': 'Error de validación',
            'message': str(e.message)
        })
    if isinstance(e, LyquorError):
        return respuesta(e.status, e.to_dict())
    return respuesta(500, {
        'error': 'Error interno del servidor',
        'message': str(e)
    })


def parsear_body(event):
    """
    Extrae el body del evento (string JSON o dict ya parseado)
    """
    if isinstance(event.get('body'), str):
        return json.loads(event['body'])
    return event.get('body', event)

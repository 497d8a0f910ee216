"""
Valores de Lyquid y su codificación canónica.

Un Value es una unión etiquetada: U256 (int de Python, nunca bool), Address,
bool, bytes, str, lista y mapa. La codificación binaria es única por valor:
etiqueta de un byte, enteros little-endian de ancho fijo, prefijos de longitud
u32 y claves de mapa ordenadas por su propia codificación.

La forma de texto canónica es JSON (ver `valor_a_json` / `json_a_valor`).
"""
import hashlib
import struct
from dataclasses import dataclass

U256_MAX = (1 << 256) - 1

TAG_U256 = 0x01
TAG_ADDRESS = 0x02
TAG_BOOL = 0x03
TAG_BYTES = 0x04
TAG_STRING = 0x05
TAG_LIST = 0x06
TAG_MAP = 0x07


@dataclass(frozen=True, order=True)
class Address:
    raw: bytes

    def __post_init__(self):
        if not isinstance(self.raw, bytes) or len(self.raw) != 20:
            raise ValueError(f"Una dirección tiene 20 bytes, se recibió {self.raw!r}")

    def hex(self):
        return '0x' + self.raw.hex()

    def __repr__(self):
        return f"Address({self.hex()})"

    @classmethod
    def from_hex(cls, texto):
        texto = texto[2:] if texto.startswith('0x') else texto
        return cls(bytes.fromhex(texto))

    @classmethod
    def for_account(cls, nombre):
        return cls(hashlib.sha256(f"account:{nombre}".encode('utf-8')).digest()[:20])

    @classmethod
    def for_service(cls, service):
        return cls(hashlib.sha256(f"service:{service}".encode('utf-8')).digest()[:20])


def es_u256(v):
    return isinstance(v, int) and not isinstance(v, bool) and 0 <= v <= U256_MAX


def encode(valor):
    """
    Codificación canónica de un Value
    """
    partes = []
    _encode_en(valor, partes)
    return b''.join(partes)


def _encode_en(valor, partes):
    if isinstance(valor, bool):
        partes.append(struct.pack('<BB', TAG_BOOL, 1 if valor else 0))
    elif isinstance(valor, int):
        if not es_u256(valor):
            raise ValueError(f"Entero fuera de rango U256: {valor}")
        partes.append(bytes([TAG_U256]) + valor.to_bytes(32, 'little'))
    elif isinstance(valor, Address):
        partes.append(bytes([TAG_ADDRESS]) + valor.raw)
    elif isinstance(valor, (bytes, bytearray)):
        partes.append(struct.pack('<BI', TAG_BYTES, len(valor)) + bytes(valor))
    elif isinstance(valor, str):
        datos = valor.encode('utf-8')
        partes.append(struct.pack('<BI', TAG_STRING, len(datos)) + datos)
    elif isinstance(valor, (list, tuple)):
        partes.append(struct.pack('<BI', TAG_LIST, len(valor)))
        for item in valor:
            _encode_en(item, partes)
    elif isinstance(valor, dict):
        pares = sorted((encode(k), encode(v)) for k, v in valor.items())
        partes.append(struct.pack('<BI', TAG_MAP, len(pares)))
        for clave, val in pares:
            partes.append(clave)
            partes.append(val)
    else:
        raise ValueError(f"Tipo no soportado como Value: {type(valor).__name__}")


def decode(datos):
    """
    Decodifica exactamente un Value; rechaza bytes sobrantes
    """
    valor, fin = decode_desde(datos, 0)
    if fin != len(datos):
        raise ValueError(f"Bytes sobrantes tras el Value ({len(datos) - fin})")
    return valor


def decode_desde(datos, pos):
    try:
        tag = datos[pos]
    except IndexError:
        raise ValueError("Value truncado") from None
    pos += 1
    if tag == TAG_U256:
        _exigir(datos, pos, 32)
        return int.from_bytes(datos[pos:pos + 32], 'little'), pos + 32
    if tag == TAG_ADDRESS:
        _exigir(datos, pos, 20)
        return Address(bytes(datos[pos:pos + 20])), pos + 20
    if tag == TAG_BOOL:
        _exigir(datos, pos, 1)
        if datos[pos] not in (0, 1):
            raise ValueError("Booleano no canónico")
        return datos[pos] == 1, pos + 1
    if tag in (TAG_BYTES, TAG_STRING):
        _exigir(datos, pos, 4)
        (largo,) = struct.unpack_from('<I', datos, pos)
        pos += 4
        _exigir(datos, pos, largo)
        crudo = bytes(datos[pos:pos + largo])
        return (crudo if tag == TAG_BYTES else crudo.decode('utf-8')), pos + largo
    if tag == TAG_LIST:
        _exigir(datos, pos, 4)
        (cuenta,) = struct.unpack_from('<I', datos, pos)
        pos += 4
        items = []
        for _ in range(cuenta):
            item, pos = decode_desde(datos, pos)
            items.append(item)
        return items, pos
    if tag == TAG_MAP:
        _exigir(datos, pos, 4)
        (cuenta,) = struct.unpack_from('<I', datos, pos)
        pos += 4
        mapa = {}
        for _ in range(cuenta):
            clave, pos = decode_desde(datos, pos)
            val, pos = decode_desde(datos, pos)
            mapa[_hashable(clave)] = val
        return mapa, pos
    raise ValueError(f"Etiqueta de Value desconocida: {tag:#x}")


def _exigir(datos, pos, n):
    if pos + n > len(datos):
        raise ValueError("Value truncado")


def _hashable(valor):
    if isinstance(valor, list):
        return tuple(_hashable(v) for v in valor)
    if isinstance(valor, dict):
        raise ValueError("Un mapa no puede ser clave de otro mapa")
    return valor


def digest(valor):
    return hashlib.sha256(encode(valor)).hexdigest()


# ==================== FORMA DE TEXTO (JSON) ====================

VALOR_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "Value",
    "definitions": {
        "valor": {
            "anyOf": [
                {"type": "integer", "minimum": 0},
                {"type": "boolean"},
                {"type": "string"},
                {"type": "array", "items": {"$ref": "#/definitions/valor"}},
                {
                    "type": "object",
                    "properties": {"address": {"type": "string", "pattern": "^0x[0-9a-fA-F]{40}$"}},
                    "required": ["address"],
                    "additionalProperties": False
                },
                {
                    "type": "object",
                    "properties": {"bytes": {"type": "string", "pattern": "^([0-9a-fA-F]{2})*$"}},
                    "required": ["bytes"],
                    "additionalProperties": False
                },
                {
                    "type": "object",
                    "properties": {"account": {"type": "string", "minLength": 1}},
                    "required": ["account"],
                    "additionalProperties": False
                },
                {
                    "type": "object",
                    "properties": {"service": {"type": "string", "minLength": 1}},
                    "required": ["service"],
                    "additionalProperties": False
                },
                {
                    "type": "object",
                    "properties": {
                        "map": {
                            "type": "array",
                            "items": {
                                "type": "array",
                                "items": {"$ref": "#/definitions/valor"},
                                "minItems": 2,
                                "maxItems": 2
                            }
                        }
                    },
                    "required": ["map"],
                    "additionalProperties": False
                }
            ]
        }
    },
    "$ref": "#/definitions/valor"
}


def valor_a_json(valor):
    """
    Convierte recursivamente un Value a su forma JSON canónica
    """
    if isinstance(valor, bool):
        return valor
    if isinstance(valor, int):
        return valor
    if isinstance(valor, Address):
        return {'address': valor.hex()}
    if isinstance(valor, (bytes, bytearray)):
        return {'bytes': bytes(valor).hex()}
    if isinstance(valor, str):
        return valor
    if isinstance(valor, (list, tuple)):
        return [valor_a_json(item) for item in valor]
    if isinstance(valor, dict):
        pares = sorted(valor.items(), key=lambda kv: encode(kv[0]))
        return {'map': [[valor_a_json(k), valor_a_json(v)] for k, v in pares]}
    raise ValueError(f"Tipo no soportado como Value: {type(valor).__name__}")


def json_a_valor(obj):
    """
    Convierte recursivamente la forma JSON (con azúcar account/service) a Value
    """
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, int):
        if not es_u256(obj):
            raise ValueError(f"Entero fuera de rango U256: {obj}")
        return obj
    if isinstance(obj, str):
        return obj
    if isinstance(obj, list):
        return [json_a_valor(item) for item in obj]
    if isinstance(obj, dict) and len(obj) == 1:
        (clave, dato), = obj.items()
        if clave == 'address':
            return Address.from_hex(dato)
        if clave == 'bytes':
            return bytes.fromhex(dato)
        if clave == 'account':
            return Address.for_account(dato)
        if clave == 'service':
            return Address.for_service(dato)
        if clave == 'map':
            return {_hashable(json_a_valor(k)): json_a_valor(v) for k, v in dato}
    raise ValueError(f"Forma JSON de Value no reconocida: {obj!r}")

"""
Formato de la imagen persistente de un MemorySpace.

    cabecera | índice de páginas (u32 por página) | snapshots (u32 + u64 c/u) | datos

Todos los enteros son little-endian de ancho fijo. El checksum es SHA-256 de
la imagen completa con los campos `persisted_at` y `checksum` en cero.
"""
import hashlib
import struct
from dataclasses import dataclass

from Comun.errores import CorruptImage

MAGIC = b'LYQDMA\x00\x01'
VERSION = 1

CABECERA = struct.Struct('<8sHHI IIII II I Q 32s')
OFFSET_PERSISTED_AT = CABECERA.size - 8 - 32
OFFSET_CHECKSUM = CABECERA.size - 32


@dataclass(frozen=True)
class Cabecera:
    page_size: int
    regiones: tuple
    raices: tuple
    paginas: tuple
    snapshots: tuple
    persisted_at: int
    checksum: bytes
    data_offset: int


def data_offset(cuenta_paginas, cuenta_snapshots):
    return CABECERA.size + 4 * cuenta_paginas + 4 + 8 * cuenta_snapshots


def construir(page_size, regiones, raices, paginas, snapshots, persisted_at):
    """
    Arma la imagen completa con el checksum en cero
    Returns: (bytearray, bytes) - (imagen, checksum calculado)
    """
    numeros = sorted(paginas)
    cabecera = CABECERA.pack(
        MAGIC, VERSION, 0, page_size,
        regiones[0][0], regiones[0][1], regiones[1][0], regiones[1][1],
        raices[0], raices[1],
        len(numeros),
        0,
        b'\x00' * 32,
    )
    cuerpo = bytearray()
    cuerpo += struct.pack(f'<{len(numeros)}I', *numeros)
    cuerpo += struct.pack('<I', len(snapshots))
    cuerpo += struct.pack(f'<{len(snapshots)}Q', *snapshots)
    for numero in numeros:
        cuerpo += paginas[numero]
    imagen = bytearray(cabecera) + cuerpo
    checksum = hashlib.sha256(imagen).digest()
    struct.pack_into('<Q', imagen, OFFSET_PERSISTED_AT, persisted_at)
    return imagen, checksum


def leer(datos, page_size):
    """
    Valida y parsea la imagen; cualquier inconsistencia es CorruptImage
    """
    if len(datos) < CABECERA.size:
        raise CorruptImage(f"Imagen truncada ({len(datos)} bytes)")
    try:
        (magic, version, _flags, tam_pagina,
         ns, ne, is_, ie, raiz_net, raiz_inst,
         cuenta, persisted_at, checksum) = CABECERA.unpack_from(datos, 0)
        if magic != MAGIC or version != VERSION:
            raise CorruptImage("Magic o versión de imagen desconocidos")
        if tam_pagina != page_size:
            raise CorruptImage(f"Tamaño de página {tam_pagina} != {page_size}")
        pos = CABECERA.size
        numeros = struct.unpack_from(f'<{cuenta}I', datos, pos)
        pos += 4 * cuenta
        (n_snap,) = struct.unpack_from('<I', datos, pos)
        pos += 4
        snapshots = struct.unpack_from(f'<{n_snap}Q', datos, pos)
        pos += 8 * n_snap
    except struct.error as e:
        raise CorruptImage(f"Imagen truncada: {e}") from None

    if len(datos) != pos + cuenta * page_size:
        raise CorruptImage("El tamaño de la imagen no coincide con su índice")

    normalizada = bytearray(datos)
    struct.pack_into('<Q', normalizada, OFFSET_PERSISTED_AT, 0)
    normalizada[OFFSET_CHECKSUM:OFFSET_CHECKSUM + 32] = b'\x00' * 32
    if hashlib.sha256(normalizada).digest() != checksum:
        raise CorruptImage("Checksum de imagen inválido")

    return Cabecera(
        page_size=tam_pagina,
        regiones=((ns, ne), (is_, ie)),
        raices=(raiz_net, raiz_inst),
        paginas=tuple(numeros),
        snapshots=tuple(snapshots),
        persisted_at=persisted_at,
        checksum=checksum,
        data_offset=pos,
    )


def escribir_paginas_sombra(path, paginas):
    """
    Archivo de páginas sombra de una época de snapshot: u32 cuenta + (u32, página)*
    """
    with open(path, 'wb') as f:
        f.write(struct.pack('<I', len(paginas)))
        for numero in sorted(paginas):
            f.write(struct.pack('<I', numero))
            f.write(paginas[numero])


def leer_paginas_sombra(path, page_size):
    datos = path.read_bytes()
    try:
        (cuenta,) = struct.unpack_from('<I', datos, 0)
        pos = 4
        paginas = {}
        for _ in range(cuenta):
            (numero,) = struct.unpack_from('<I', datos, pos)
            pos += 4
            if pos + page_size > len(datos):
                raise CorruptImage(f"Archivo sombra truncado: {path}")
            paginas[numero] = bytes(datos[pos:pos + page_size])
            pos += page_size
    except struct.error as e:
        raise CorruptImage(f"Archivo sombra inválido {path}: {e}") from None
    return paginas

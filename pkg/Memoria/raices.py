"""
Tabla de raíces de una región: nombre → (dirección, etiqueta de tipo).

Vive en las páginas más bajas de la región, después de la cabecera del
asignador: `[cuenta u32][reservado u32]` seguido de entradas de 32 bytes
`[nombre 24s][addr u32][tag u32]`.
"""
import struct

from Comun.errores import DuplicateName, OutOfMemory, UnknownRoot

ROOT_TABLE_OFFSET = 0x100
ENTRADA = struct.Struct('<24sII')
CAPACIDAD = (0x1000 - ROOT_TABLE_OFFSET - 8) // ENTRADA.size

TIPOS = {
    'u256': 1,
    'bool': 2,
    'address': 3,
    'bytes': 4,
    'string': 5,
    'value': 6,
    'list': 7,
    'map': 8,
}
NOMBRES_TIPO = {tag: nombre for nombre, tag in TIPOS.items()}


class RootTable:

    def __init__(self, space, region):
        self.space = space
        self.region = region
        self.addr = region.start + ROOT_TABLE_OFFSET

    def inicializar(self):
        self.space.write(self.addr, struct.pack('<II', 0, 0))

    def _cuenta(self):
        return struct.unpack('<I', self.space.read(self.addr, 4))[0]

    def entries(self):
        """
        Todas las raíces en orden de declaración: {nombre: (addr, tipo)}
        """
        cuenta = self._cuenta()
        crudo = self.space.read(self.addr + 8, cuenta * ENTRADA.size)
        salida = {}
        for i in range(cuenta):
            nombre, addr, tag = ENTRADA.unpack_from(crudo, i * ENTRADA.size)
            salida[nombre.rstrip(b'\x00').decode('utf-8')] = (addr, NOMBRES_TIPO[tag])
        return salida

    def get(self, name):
        entradas = self.entries()
        if name not in entradas:
            raise UnknownRoot(f"La raíz '{name}' no existe en la región {self.region.name}")
        return entradas[name]

    def add(self, name, addr, tipo):
        codificado = name.encode('utf-8')
        if not codificado or len(codificado) > 24:
            raise ValueError(f"Nombre de raíz inválido: {name!r}")
        if not self.region.contains(addr):
            raise ValueError(f"La raíz '{name}' apunta fuera de su región: {addr:#x}")
        if name in self.entries():
            raise DuplicateName(f"La raíz '{name}' ya existe en la región {self.region.name}")
        cuenta = self._cuenta()
        if cuenta >= CAPACIDAD:
            raise OutOfMemory(f"Tabla de raíces llena en la región {self.region.name}")
        self.space.write(
            self.addr + 8 + cuenta * ENTRADA.size,
            ENTRADA.pack(codificado, addr, TIPOS[tipo]),
        )
        self.space.write(self.addr, struct.pack('<I', cuenta + 1))

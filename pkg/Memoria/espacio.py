"""
MemorySpace: memoria virtual de 32 bits, persistente y direccionable por byte,
una por servicio.

- Región de red: [0x0000_0000, 0x7FFF_FFFF], versionada por posición.
- Región de instancia: [0x8000_0000, 0xFFFF_FFFF], local a cada nodo.

Las páginas se cargan bajo demanda desde la imagen; lo no asignado lee cero.
El camino de lectura/escritura es pura aritmética de direcciones.
"""
import hashlib
import os
import shutil
import struct
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from Comun.errores import (
    CorruptImage, NonMonotonicPosition, OutOfRange, RegionViolation,
    StoreUnavailable, UnknownSnapshot,
)
from Comun.logs import get_logger
from Memoria import imagen
from Memoria.asignador import Allocator
from Memoria.raices import ROOT_TABLE_OFFSET, RootTable

logger = get_logger(__name__)

PAGE_SIZE = 4096
ADDRESS_SPACE = 1 << 32

IMAGE_NAME = 'image.bin'
SHADOW_IMAGE_NAME = 'image.shadow'


@dataclass(frozen=True)
class Region:
    name: str
    start: int
    end: int

    def contains(self, addr):
        return self.start <= addr <= self.end


NETWORK = Region('network', 0x0000_0000, 0x7FFF_FFFF)
INSTANCE = Region('instance', 0x8000_0000, 0xFFFF_FFFF)
REGIONS = {'network': NETWORK, 'instance': INSTANCE}

# Escrituras permitidas por modo de ejecución
_PERMISOS = {
    'idle': {'instance'},
    'genesis': {'network', 'instance'},
    'network': {'network'},
    'instance': {'instance'},
    'view': set(),
}


@dataclass(frozen=True)
class SnapshotId:
    service: str
    position: int
    epoch: int


@dataclass
class PageCounters:
    loaded: int = 0
    copied: int = 0
    hashed: int = 0
    touched: set = field(default_factory=set)

    def reset(self):
        self.loaded = 0
        self.copied = 0
        self.hashed = 0
        self.touched = set()


class SimulatedCrash(Exception):
    """Corte simulado del proceso en medio de persist (solo pruebas)."""


def region_of(addr):
    return NETWORK if addr <= NETWORK.end else INSTANCE


class MemorySpace:

    def __init__(self, service, location=None):
        self.service = service
        self.location = Path(location) if location is not None else None
        self.counters = PageCounters()
        self._pages = {}
        self._dirty = set()
        self._stored = {}
        self._versions = []
        self._shadows = []
        self._journal = []
        self._modos = []
        self.allocators = {name: Allocator(self, region) for name, region in REGIONS.items()}
        self.roots = {name: RootTable(self, region) for name, region in REGIONS.items()}

    # ==================== APERTURA ====================

    @classmethod
    def open(cls, service, location=None):
        """
        Abre un espacio: fresco si no hay imagen, o la imagen previa tal cual
        """
        space = cls(service, location)
        ruta = space._ruta_imagen()
        if ruta is not None and ruta.exists():
            space._abrir_imagen(ruta)
        else:
            space._inicializar()
        return space

    @classmethod
    def recover(cls, service, location):
        """
        Restaura la copia sombra escrita por el último persist exitoso
        """
        location = Path(location)
        sombra = location / SHADOW_IMAGE_NAME
        if not sombra.exists():
            raise CorruptImage(f"No hay copia sombra en {location}")
        logger.warning("Recuperando %s desde la copia sombra", location)
        shutil.copyfile(sombra, location / IMAGE_NAME)
        return cls.open(service, location)

    def _ruta_imagen(self):
        return self.location / IMAGE_NAME if self.location is not None else None

    def _inicializar(self):
        with self._modo('genesis'):
            for name in REGIONS:
                self.allocators[name].inicializar()
                self.roots[name].inicializar()

    def _abrir_imagen(self, ruta):
        try:
            datos = ruta.read_bytes()
        except OSError as e:
            raise StoreUnavailable(f"No se pudo leer {ruta}: {e}") from None
        cabecera = imagen.leer(datos, PAGE_SIZE)
        for i, numero in enumerate(cabecera.paginas):
            self._stored[numero] = cabecera.data_offset + i * PAGE_SIZE
        for epoch, position in enumerate(cabecera.snapshots):
            self._versions.append(SnapshotId(self.service, position, epoch))
            self._shadows.append(None)

    # ==================== MODOS ====================

    @contextmanager
    def _modo(self, nombre):
        self._modos.append(nombre)
        try:
            yield self
        finally:
            self._modos.pop()

    @property
    def mode(self):
        return self._modos[-1] if self._modos else 'idle'

    def sequenced(self):
        return self._modo('network')

    def instance_execution(self):
        return self._modo('instance')

    def view(self):
        return self._modo('view')

    def genesis(self):
        return self._modo('genesis')

    # ==================== PÁGINAS ====================

    def _leer_pagina_archivo(self, numero):
        with open(self._ruta_imagen(), 'rb') as f:
            f.seek(self._stored[numero])
            return f.read(PAGE_SIZE)

    def _pagina(self, numero):
        pagina = self._pages.get(numero)
        if pagina is None:
            if numero in self._stored:
                pagina = bytearray(self._leer_pagina_archivo(numero))
            else:
                pagina = bytearray(PAGE_SIZE)
            self._pages[numero] = pagina
            self.counters.loaded += 1
        self.counters.touched.add(numero)
        return pagina

    def page_state(self, numero):
        if numero in self._dirty:
            return 'loaded-dirty'
        if numero in self._pages:
            return 'loaded-clean'
        return 'unloaded'

    def _contenido_pagina(self, numero):
        """Contenido sin pasar por la tabla de páginas (persist, digest)."""
        if numero in self._pages:
            return bytes(self._pages[numero])
        if numero in self._stored:
            return self._leer_pagina_archivo(numero)
        return bytes(PAGE_SIZE)

    def _numeros_de_pagina(self):
        return set(self._pages) | set(self._stored)

    # ==================== LECTURA / ESCRITURA ====================

    def _verificar(self, addr, length):
        if length < 0 or addr < 0 or addr + length > ADDRESS_SPACE:
            raise OutOfRange(f"Acceso [{addr:#x}, +{length}) fuera del espacio de 32 bits")
        region = region_of(addr)
        if length and not region.contains(addr + length - 1):
            raise OutOfRange(f"Acceso [{addr:#x}, +{length}) cruza el límite de región")
        return region

    def read(self, addr, length):
        self._verificar(addr, length)
        salida = bytearray()
        fin = addr + length
        while addr < fin:
            numero, offset = divmod(addr, PAGE_SIZE)
            n = min(PAGE_SIZE - offset, fin - addr)
            salida += self._pagina(numero)[offset:offset + n]
            addr += n
        return bytes(salida)

    def write(self, addr, data):
        region = self._verificar(addr, len(data))
        if region.name not in _PERMISOS[self.mode]:
            raise RegionViolation(
                f"Escritura en región {region.name} no permitida en modo {self.mode}"
            )
        vista = memoryview(bytes(data))
        fin = addr + len(data)
        hecho = 0
        while addr < fin:
            numero, offset = divmod(addr, PAGE_SIZE)
            n = min(PAGE_SIZE - offset, fin - addr)
            pagina = self._pagina(numero)
            if region is NETWORK:
                self._copiar_en_escritura(numero, pagina)
            if self._journal and numero not in self._journal[-1]:
                self._journal[-1][numero] = bytes(pagina)
            pagina[offset:offset + n] = vista[hecho:hecho + n]
            self._dirty.add(numero)
            addr += n
            hecho += n

    def _copiar_en_escritura(self, numero, pagina):
        if not self._versions:
            return
        sombra = self._sombra(len(self._versions) - 1)
        if numero not in sombra:
            sombra[numero] = bytes(pagina)
            self.counters.copied += 1

    # ==================== ASIGNACIÓN ====================

    def alloc(self, region, size, align=8):
        return self.allocators[region].alloc(size, align)

    def free(self, region, addr):
        self.allocators[region].free(addr)

    # ==================== JOURNAL ====================

    def begin(self):
        """Abre un savepoint; los savepoints se anidan."""
        self._journal.append({})

    def commit(self):
        nivel = self._journal.pop()
        if self._journal:
            padre = self._journal[-1]
            for numero, previa in nivel.items():
                padre.setdefault(numero, previa)

    def rollback(self):
        nivel = self._journal.pop()
        for numero, previa in nivel.items():
            self._pages[numero][:] = previa
            self._dirty.add(numero)

    @property
    def in_transaction(self):
        return bool(self._journal)

    @property
    def journal_pages(self):
        """Páginas escritas dentro del savepoint más interno."""
        return len(self._journal[-1]) if self._journal else 0

    # ==================== SNAPSHOTS ====================

    def _sombra(self, epoch):
        sombra = self._shadows[epoch]
        if sombra is None:
            sombra = {}
            ruta = self._ruta_sombra(self._versions[epoch].position)
            if ruta is not None and ruta.exists():
                sombra = imagen.leer_paginas_sombra(ruta, PAGE_SIZE)
            self._shadows[epoch] = sombra
        return sombra

    def _ruta_sombra(self, position):
        if self.location is None:
            return None
        return self.location / f"snap-{position:020d}.pages"

    @property
    def versions(self):
        return [(s.position, s) for s in self._versions]

    def snapshot(self, position):
        """
        Captura copy-on-write de la región de red en `position`
        """
        if self._versions and position <= self._versions[-1].position:
            raise NonMonotonicPosition(
                f"Snapshot en {position} no supera el último ({self._versions[-1].position})"
            )
        snap = SnapshotId(self.service, position, len(self._versions))
        self._versions.append(snap)
        self._shadows.append({})
        return snap

    def snapshot_at(self, position):
        for snap in self._versions:
            if snap.position == position:
                return snap
        raise UnknownSnapshot(f"No hay snapshot en la posición {position}")

    def latest_snapshot(self, position):
        """Snapshot de mayor posición que no supera `position`."""
        candidatos = [s for s in self._versions if s.position <= position]
        if not candidatos:
            raise UnknownSnapshot(f"No hay snapshot anterior a la posición {position}")
        return candidatos[-1]

    def _verificar_snapshot(self, snap):
        if not (0 <= snap.epoch < len(self._versions)) or self._versions[snap.epoch] != snap:
            raise UnknownSnapshot(f"Snapshot desconocido: {snap}")

    def _pagina_en(self, snap, numero):
        for epoch in range(snap.epoch, len(self._versions)):
            sombra = self._sombra(epoch)
            if numero in sombra:
                return sombra[numero]
        return bytes(self._pagina(numero))

    def read_at(self, snap, addr, length):
        """
        Bytes de la región de red tal como estaban en la posición del snapshot
        """
        self._verificar_snapshot(snap)
        region = self._verificar(addr, length)
        if region is not NETWORK:
            raise RegionViolation("La región de instancia no se versiona")
        salida = bytearray()
        fin = addr + length
        while addr < fin:
            numero, offset = divmod(addr, PAGE_SIZE)
            n = min(PAGE_SIZE - offset, fin - addr)
            salida += self._pagina_en(snap, numero)[offset:offset + n]
            addr += n
        return bytes(salida)

    def materialize(self, snap):
        """
        Espacio en memoria cuya región de red es la del snapshot
        """
        self._verificar_snapshot(snap)
        copia = MemorySpace(self.service, None)
        numeros = set(self._numeros_de_pagina())
        for epoch in range(snap.epoch, len(self._versions)):
            numeros |= set(self._sombra(epoch))
        for numero in sorted(numeros):
            if numero * PAGE_SIZE <= NETWORK.end:
                for epoch in range(snap.epoch, len(self._versions)):
                    sombra = self._sombra(epoch)
                    if numero in sombra:
                        contenido = sombra[numero]
                        break
                else:
                    contenido = self._contenido_pagina(numero)
            else:
                contenido = self._contenido_pagina(numero)
            copia._pages[numero] = bytearray(contenido)
        return copia

    # ==================== DIGESTS ====================

    def region_pages(self, region='network'):
        """Páginas no nulas de una región: {numero: bytes}."""
        limites = REGIONS[region]
        paginas = {}
        for numero in sorted(self._numeros_de_pagina()):
            if limites.contains(numero * PAGE_SIZE):
                contenido = self._contenido_pagina(numero)
                if any(contenido):
                    paginas[numero] = contenido
        return paginas

    def network_digest(self):
        self.counters.hashed += 1
        h = hashlib.sha256()
        for numero, contenido in self.region_pages('network').items():
            h.update(struct.pack('<I', numero))
            h.update(contenido)
        return h.hexdigest()

    # ==================== PERSISTENCIA ====================

    def persist(self, _crash_after_flush=False):
        """
        Vuelca la imagen completa; el checksum se escribe al final
        """
        if self.location is None:
            raise StoreUnavailable(f"El espacio de {self.service} no tiene almacenamiento")
        ruta = self._ruta_imagen()
        paginas = {}
        for numero in sorted(self._numeros_de_pagina()):
            contenido = self._contenido_pagina(numero)
            if any(contenido):
                paginas[numero] = contenido
        datos, checksum = imagen.construir(
            PAGE_SIZE,
            ((NETWORK.start, NETWORK.end), (INSTANCE.start, INSTANCE.end)),
            (NETWORK.start + ROOT_TABLE_OFFSET, INSTANCE.start + ROOT_TABLE_OFFSET),
            paginas,
            [s.position for s in self._versions],
            time.time_ns(),
        )
        try:
            self.location.mkdir(parents=True, exist_ok=True)
            if ruta.exists():
                shutil.copyfile(ruta, self.location / SHADOW_IMAGE_NAME)
            with open(ruta, 'wb') as f:
                f.write(datos)
                f.flush()
                os.fsync(f.fileno())
                if _crash_after_flush:
                    raise SimulatedCrash(f"Corte simulado persistiendo {ruta}")
                f.seek(imagen.OFFSET_CHECKSUM)
                f.write(checksum)
                f.flush()
                os.fsync(f.fileno())
            for epoch, snap in enumerate(self._versions):
                sombra = self._shadows[epoch]
                if sombra is not None:
                    imagen.escribir_paginas_sombra(self._ruta_sombra(snap.position), sombra)
        except OSError as e:
            raise StoreUnavailable(f"No se pudo persistir {ruta}: {e}") from None

        self.counters.hashed += 1
        data_offset = imagen.data_offset(len(paginas), len(self._versions))
        self._stored = {
            numero: data_offset + i * PAGE_SIZE
            for i, numero in enumerate(sorted(paginas))
        }
        self._dirty.clear()
        return ruta

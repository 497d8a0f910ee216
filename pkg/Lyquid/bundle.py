"""
LyquidBundle: paquete desplegable de raíces con nombre y métodos.

Los bundles son registros en proceso de funciones Python; `code_tag` es el
digest de la versión registrada (tipo, versión, raíces y nombres de métodos).
"""
import hashlib
from dataclasses import dataclass, field, replace
from types import MappingProxyType

from Comun.errores import DuplicateName
from Lyquid.estructuras import verificar_tipo
from Lyquid.valor import encode
from Memoria.raices import TIPOS

KINDS = ('network', 'instance', 'upc')


@dataclass(frozen=True)
class RootSpec:
    region: str
    name: str
    tipo: str
    initializer: object


@dataclass(frozen=True)
class MethodSpec:
    name: str
    behavior: object
    callees: frozenset = frozenset()
    view: bool = False


def _vacio():
    return MappingProxyType({})


@dataclass(frozen=True)
class LyquidBundle:
    name: str
    kind: str = 'custom'
    version: str = '1'
    roots: tuple = ()
    network_methods: MappingProxyType = field(default_factory=_vacio)
    instance_methods: MappingProxyType = field(default_factory=_vacio)
    upc_handlers: MappingProxyType = field(default_factory=_vacio)

    @property
    def code_tag(self):
        h = hashlib.sha256()
        h.update(encode([self.kind, self.version, self.name]))
        for root in self.roots:
            h.update(encode([root.region, root.name, root.tipo]))
        for metodos in (self.network_methods, self.instance_methods, self.upc_handlers):
            h.update(encode(sorted(metodos)))
        return h.hexdigest()

    @property
    def callees(self):
        """Servicios que los métodos de red declaran poder llamar."""
        salida = set()
        for spec in self.network_methods.values():
            salida |= spec.callees
        return frozenset(salida)

    def with_root(self, region, name, tipo, initializer):
        return replace(self, roots=self.roots + (RootSpec(region, name, tipo, initializer),))

    def _con_metodo(self, campo, spec):
        actuales = getattr(self, campo)
        if spec.name in actuales:
            raise DuplicateName(f"'{spec.name}' ya está registrado en {campo} de {self.name}")
        nuevos = dict(actuales)
        nuevos[spec.name] = spec
        return replace(self, **{campo: MappingProxyType(nuevos)})

    def with_network_method(self, name, behavior, callees=(), view=False):
        return self._con_metodo('network_methods', MethodSpec(name, behavior, frozenset(callees), view))

    def with_instance_method(self, name, behavior):
        return self._con_metodo('instance_methods', MethodSpec(name, behavior))

    def with_upc_handler(self, name, behavior):
        return self._con_metodo('upc_handlers', MethodSpec(name, behavior))


def register_handler(bundle, name, behavior):
    """
    Registra un handler UPC; devuelve el bundle actualizado
    """
    return bundle.with_upc_handler(name, behavior)


def verificar_bundle(bundle, instance_init=None):
    """
    Verifica nombres únicos de raíces y tipos de los inicializadores
    Returns: (bool, Exception) - (éxito, error a lanzar)
    """
    if not isinstance(bundle.name, str) or not bundle.name:
        return False, ValueError("El bundle necesita un nombre de servicio")
    vistos = set()
    for root in bundle.roots:
        if root.name in vistos:
            return False, DuplicateName(f"Raíz duplicada '{root.name}' en {bundle.name}")
        vistos.add(root.name)
        if root.region not in ('network', 'instance'):
            return False, ValueError(f"Región desconocida '{root.region}' en la raíz {root.name}")
        if root.tipo not in TIPOS:
            return False, ValueError(f"Tipo desconocido '{root.tipo}' en la raíz {root.name}")
        inicial = (instance_init or {}).get(root.name, root.initializer) \
            if root.region == 'instance' else root.initializer
        exito, error_msg = verificar_tipo(root.tipo, inicial)
        if not exito:
            return False, ValueError(f"Inicializador de '{root.name}': {error_msg}")
    return True, None

"""
Runtime de Lyquids: despliegue, ejecución de red con gas y reversión,
métodos de instancia, vistas y llamadas entre servicios.

Una llamada interna hacia un servicio alojado se ejecuta en línea en la misma
posición. Si el destino no está alojado, el resultado sale del registro de
efectos que el nodo obtiene del archival (`resolver`), y los descendientes de
ese registro que sí tocan servicios alojados se re-ejecutan localmente.
"""
from dataclasses import dataclass
from pathlib import Path

from Comun import config
from Comun.errores import (
    CorruptImage, DuplicateName, EffectDivergence, EffectGap, ExecutionFailure,
    LyquorError, MethodError, MethodNotFound, NotHosted, RegionViolation,
    StoreUnavailable, UndeclaredCall, UnresolvedEffect, failure_from_code,
)
from Comun.logs import get_logger
from Lyquid.bundle import verificar_bundle
from Lyquid.contexto import GAS_CALL, Effect, GasMeter, InstanceContext, NetworkContext
from Lyquid.estructuras import Acceso, Raices, costo_memoria, crear_raiz
from Lyquid.valor import Address, encode
from Memoria.espacio import MemorySpace

logger = get_logger(__name__)

# Errores de infraestructura: nunca se convierten en fallo del método
_INFRAESTRUCTURA = (
    UnresolvedEffect, EffectGap, EffectDivergence, UndeclaredCall,
    StoreUnavailable, CorruptImage,
)


@dataclass(frozen=True)
class ExecutionOutcome:
    position: int
    service: str
    method: str
    status: str
    result: object = None
    error: str = None
    effects: tuple = ()
    gas_used: int = 0

    @property
    def ok(self):
        return self.status == 'ok'


class _Ejecucion:
    """Estado de una entrada en curso: gas, efectos y espacios tocados."""

    def __init__(self, runtime, position, meter, records=None, allowed=None, modo='network'):
        self.runtime = runtime
        self.position = position
        self.meter = meter
        self.records = records
        self.allowed = allowed
        self.modo = modo
        self.effects = []
        self.contador = 0
        self.tocados = []
        self.abortada = None

    def siguiente_indice(self):
        indice = self.contador
        self.contador += 1
        return indice

    def tocar(self, space):
        if self.modo != 'network':
            return
        if not any(s is space for s in self.tocados):
            space.begin()
            self.tocados.append(space)

    def emit(self, ctx, name, value):
        self.meter.charge(costo_memoria(len(encode(value))))
        self.effects.append(Effect('event', self.position, ctx.service, ctx.service, name, (value,)))


class Runtime:

    def __init__(self, data_dir=None, resolver=None):
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.resolver = resolver
        self.bundles = {}
        self.spaces = {}

    # ==================== DESPLIEGUE ====================

    def hosts(self, service):
        return service in self.bundles

    def deploy(self, bundle, instance_init=None):
        """
        Crea (o reabre) el MemorySpace del servicio e inicializa sus raíces
        """
        exito, error = verificar_bundle(bundle, instance_init)
        if not exito:
            raise error
        if bundle.name in self.bundles:
            raise DuplicateName(f"El servicio '{bundle.name}' ya está desplegado")

        location = self.data_dir / bundle.name if self.data_dir is not None else None
        space = MemorySpace.open(bundle.name, location)
        if not space.roots['network'].entries() and not space.roots['instance'].entries():
            with space.genesis():
                for root in bundle.roots:
                    inicial = root.initializer
                    if root.region == 'instance' and instance_init and root.name in instance_init:
                        inicial = instance_init[root.name]
                    crear_raiz(Acceso(space, root.region), root.name, root.tipo, inicial)
            logger.info("Desplegado %s (%s) code_tag=%s", bundle.name, bundle.kind, bundle.code_tag[:12])
        else:
            logger.info("Reabierto %s desde %s", bundle.name, location)

        self.bundles[bundle.name] = bundle
        self.spaces[bundle.name] = space
        return bundle.name

    def read_root(self, service, name, region='network'):
        space = self.spaces.get(service)
        if space is None:
            raise NotHosted(f"El servicio '{service}' no está alojado")
        return Raices(space, region)[name].valor()

    def network_digest(self, service):
        return self.spaces[service].network_digest()

    # ==================== RED ====================

    def exec_network(self, entry, allowed=None):
        """
        Ejecuta una entrada del log; en fallo revierte todos los espacios tocados
        """
        intent = entry.intent
        if intent.target not in self.bundles:
            raise NotHosted(f"El servicio '{intent.target}' no está alojado")
        ej = _Ejecucion(self, entry.position, GasMeter(intent.gas_limit), allowed=allowed)
        try:
            resultado = self._invocar(ej, intent.caller, intent.target, intent.method, intent.args, None)
            falla = ej.meter.agotado or ej.abortada
            if falla is not None:
                raise falla
        except ExecutionFailure as e:
            self._revertir(ej)
            logger.debug("Entrada %d falló: %s", entry.position, e.code)
            return ExecutionOutcome(
                entry.position, intent.target, intent.method, 'failed',
                error=e.code, effects=tuple(ej.effects), gas_used=ej.meter.used,
            )
        except BaseException:
            self._revertir(ej)
            raise
        self._confirmar(ej)
        return ExecutionOutcome(
            entry.position, intent.target, intent.method, 'ok',
            result=resultado, effects=tuple(ej.effects), gas_used=ej.meter.used,
        )

    def apply_foreign(self, entry, records):
        """
        Aplica los efectos terminales de una entrada cuyo destino no está
        alojado: re-ejecuta las llamadas registradas hacia servicios alojados
        """
        ej = _Ejecucion(self, entry.position, GasMeter.unbounded(), records=records)
        if any(r.status == 'reverted' for r in records.values()):
            return ExecutionOutcome(entry.position, entry.target, entry.intent.method, 'skipped')
        try:
            self._aplicar_descendientes(ej, None)
        except ExecutionFailure as e:
            self._revertir(ej)
            raise EffectDivergence(
                f"Posición {entry.position}: un efecto registrado como confirmado falló localmente ({e.code})"
            ) from e
        except BaseException:
            self._revertir(ej)
            raise
        self._confirmar(ej)
        return ExecutionOutcome(
            entry.position, entry.target, entry.intent.method, 'foreign',
            effects=tuple(ej.effects),
        )

    def _confirmar(self, ej):
        for space in sorted(ej.tocados, key=lambda s: s.service):
            ej.effects.append(Effect(
                'state-write-summary', ej.position, space.service, space.service, '',
                result=space.journal_pages,
            ))
            space.commit()

    def _revertir(self, ej):
        for space in ej.tocados:
            space.rollback()

    def _invocar(self, ej, caller, target, method, args, index):
        bundle = self.bundles[target]
        spec = bundle.network_methods.get(method)
        if spec is None:
            raise MethodNotFound(f"{target} no tiene el método de red '{method}'")
        ej.meter.charge(GAS_CALL)
        space = self.spaces[target]
        ej.tocar(space)
        cobrar = ej.meter.charge
        ctx = NetworkContext(caller, target, ej.position, Raices(space, 'network', cobrar), ej, index)
        modo = space.sequenced() if ej.modo == 'network' else space.view()
        with modo:
            resultado = _llamar(spec.behavior, ctx, args)
        if ej.meter.agotado is not None:
            raise ej.meter.agotado
        return resultado

    def inner_call(self, ctx, target, method, args):
        ej = ctx._ejecucion
        index = ej.siguiente_indice()
        efecto = Effect('inner-call', ej.position, ctx.service, target, method, tuple(args),
                        index=index, parent=ctx._index)
        ej.effects.append(efecto)
        if ej.allowed is not None and target not in ej.allowed:
            raise UndeclaredCall(f"{ctx.service} llamó a {target}, fuera de su conjunto declarado")

        gas_antes = ej.meter.used
        if target in self.bundles:
            try:
                resultado = self._invocar(ej, Address.for_service(ctx.service), target, method, args, index)
            except ExecutionFailure as e:
                efecto.error = e.code
                efecto.span = ej.contador - index - 1
                efecto.gas = ej.meter.used - gas_antes
                ej.abortada = ej.abortada or e
                raise
            efecto.result = resultado
            efecto.span = ej.contador - index - 1
            efecto.gas = ej.meter.used - gas_antes
            return resultado

        registro = self._registro(ej, index)
        if (registro.source, registro.target, registro.method) != (ctx.service, target, method):
            raise EffectDivergence(
                f"Posición {ej.position} índice {index}: se esperaba {registro.target}.{registro.method}"
            )
        ej.meter.charge(registro.gas)
        efecto.span = registro.span
        efecto.gas = registro.gas
        efecto.error = registro.error
        ej.contador = index + 1 + registro.span
        if registro.error:
            falla = failure_from_code(registro.error)
            ej.abortada = ej.abortada or falla
            raise falla
        self._aplicar_descendientes(ej, index)
        ej.contador = index + 1 + registro.span
        efecto.result = registro.result
        return registro.result

    def _registro(self, ej, index):
        if ej.modo != 'network':
            raise UnresolvedEffect("Una vista no puede resolver servicios no alojados")
        if ej.records is None:
            if self.resolver is None:
                raise UnresolvedEffect(f"Sin registros de efectos para la posición {ej.position}")
            ej.records = self.resolver(ej.position)
        registro = ej.records.get(index)
        if registro is None:
            raise UnresolvedEffect(f"Falta el efecto {index} de la posición {ej.position}")
        return registro

    def _aplicar_descendientes(self, ej, padre):
        hijos = sorted((r for r in ej.records.values() if r.parent == padre), key=lambda r: r.index)
        for registro in hijos:
            if registro.target not in self.bundles:
                self._aplicar_descendientes(ej, registro.index)
                continue
            ej.contador = registro.index + 1
            ej.effects.append(Effect(
                'inner-call', ej.position, registro.source, registro.target, registro.method,
                tuple(registro.args), result=registro.result, index=registro.index,
                parent=registro.parent, span=registro.span, gas=registro.gas,
            ))
            medidor = ej.meter
            ej.meter = GasMeter.unbounded()
            try:
                resultado = self._invocar(
                    ej, Address.for_service(registro.source), registro.target,
                    registro.method, registro.args, registro.index,
                )
            finally:
                ej.meter = medidor
            if encode(resultado) != encode(registro.result):
                raise EffectDivergence(
                    f"Posición {ej.position} índice {registro.index}: resultado local distinto del registrado"
                )

    # ==================== VISTAS E INSTANCIA ====================

    def exec_view(self, service, method, args, caller, position=None):
        """
        Método de red ejecutado en solo lectura sobre el último estado aplicado
        """
        if service not in self.bundles:
            raise NotHosted(f"El servicio '{service}' no está alojado")
        ej = _Ejecucion(self, position, GasMeter(config.INSTANCE_GAS), modo='view')
        return self._invocar(ej, caller, service, method, tuple(args), None)

    def exec_instance(self, service, method, args, caller, node_id=None, upc=None):
        return self._ejecutar_instancia(service, 'instance_methods', method, args, caller, node_id, upc)

    def exec_handler(self, service, handler, args, caller, node_id=None, upc=None):
        return self._ejecutar_instancia(service, 'upc_handlers', handler, args, caller, node_id, upc)

    def _ejecutar_instancia(self, service, tabla, method, args, caller, node_id, upc):
        bundle = self.bundles.get(service)
        if bundle is None:
            raise NotHosted(f"El servicio '{service}' no está alojado")
        spec = getattr(bundle, tabla).get(method)
        if spec is None:
            raise MethodNotFound(f"{service} no tiene '{method}' en {tabla}")
        space = self.spaces[service]
        meter = GasMeter(config.INSTANCE_GAS)
        ctx = InstanceContext(
            caller, service, node_id,
            Raices(space, 'network', meter.charge),
            Raices(space, 'instance', meter.charge),
            upc, meter,
        )
        space.begin()
        try:
            with space.instance_execution():
                resultado = _llamar(spec.behavior, ctx, tuple(args))
            if meter.agotado is not None:
                raise meter.agotado
        except BaseException:
            space.rollback()
            raise
        space.commit()
        return resultado


def _llamar(behavior, ctx, args):
    """
    Invoca el comportamiento y normaliza errores y resultado
    """
    try:
        resultado = behavior(ctx, *args)
    except (ExecutionFailure, *_INFRAESTRUCTURA):
        raise
    except RegionViolation as e:
        raise MethodError('region-violation', e.message) from e
    except LyquorError as e:
        raise MethodError(e.code, e.message) from e
    except Exception as e:
        raise MethodError('exception', f"{type(e).__name__}: {e}") from e
    if resultado is None:
        resultado = []
    try:
        encode(resultado)
    except ValueError as e:
        raise MethodError('invalid-result', str(e)) from e
    return resultado

"""
Nodo Lyquor: hospedaje selectivo, ejecución de la subsecuencia propia
respetando el orden global y aplicación de efectos ajenos en su posición.
"""
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from Comun.errores import (
    EffectGap, FrontierBehind, NonMonotonicPosition, StoreUnavailable,
    UndeclaredCall, UnsealedRange,
)
from Comun.logs import get_logger
from Lyquid.runtime import ExecutionOutcome, Runtime
from Nodo.archival import EffectRecord, records_from_outcome

logger = get_logger(__name__)

FRONTIER_NAME = 'frontier.json'
EFFECTS_NAME = 'effects.jsonl'
MAX_WORKERS = 8


@dataclass(frozen=True)
class HostingProfile:
    hosted: frozenset = frozenset()
    archival: bool = False

    def services(self, deployed):
        """
        Servicios efectivamente alojados; archival implica todos
        """
        if self.archival:
            return frozenset(deployed)
        faltantes = set(self.hosted) - set(deployed)
        if faltantes:
            raise ValueError(f"Servicios alojados sin bundle: {sorted(faltantes)}")
        return frozenset(self.hosted)


@dataclass
class ExecutionFrontier:
    services: dict = field(default_factory=dict)
    global_position: int = 0

    def to_dict(self):
        return {'global': self.global_position, 'services': dict(sorted(self.services.items()))}


class Node:

    def __init__(self, node_id, sequencer, bundles, profile, effect_source=None,
                 data_dir=None, parallel=False, instance_init=None, name=None):
        self.node_id = node_id
        self.name = name or str(node_id)
        self.sequencer = sequencer
        self.profile = profile
        self.parallel = parallel
        self.effect_source = effect_source
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.upc = None
        self.records = {}
        self.outcomes = {}
        self.position = 0
        self._efectos = {}
        self._batches_con_efectos = set()

        self.runtime = Runtime(self.data_dir, resolver=self.resolver)
        for service in sorted(profile.services(bundles)):
            self.runtime.deploy(bundles[service], (instance_init or {}).get(service))
        self._cargar()
        for space in self.runtime.spaces.values():
            if not space.versions:
                space.snapshot(self.position)
        self.frontier = ExecutionFrontier(
            {service: self.position for service in self.runtime.bundles}, self.position,
        )

    @property
    def hosted(self):
        return frozenset(self.runtime.bundles)

    # ==================== EFECTOS ====================

    def resolver(self, position):
        """
        Registros de efectos de la posición; EffectGap si su batch no llegó
        """
        batch = self.sequencer.batch_of(position)
        if batch.number not in self._batches_con_efectos:
            self.fetch_effects(batch)
        return self._efectos.get(position, {})

    def fetch_effects(self, batch):
        if self.effect_source is None:
            raise EffectGap(f"Nodo {self.name}: faltan los efectos del batch {batch.number}")
        try:
            registros = self.effect_source(self.hosted, batch.start, batch.end)
        except FrontierBehind as e:
            raise EffectGap(f"Nodo {self.name}: el archival no cubre el batch {batch.number}") from e
        self.receive_effects(batch.number, registros)

    def receive_effects(self, batch_number, registros):
        for registro in registros:
            self._efectos.setdefault(registro.position, {})[registro.index] = registro
        self._batches_con_efectos.add(batch_number)

    def has_effects(self, batch_number):
        return batch_number in self._batches_con_efectos

    # ==================== EJECUCIÓN ====================

    def procesar(self, runtime, entry, allowed=None):
        """
        Ejecuta la entrada si su destino está alojado; si no, aplica los
        efectos registrados que caen en servicios alojados
        """
        if runtime.hosts(entry.target):
            return runtime.exec_network(entry, allowed)
        registros = self.resolver(entry.position)
        if not any(runtime.hosts(r.target) for r in registros.values()):
            return ExecutionOutcome(entry.position, entry.target, entry.intent.method, 'skipped')
        return runtime.apply_foreign(entry, registros)

    def run_until(self, position):
        """
        Avanza la frontera hasta `position`; se detiene (EffectGap) en la
        primera posición cuyos efectos no están disponibles
        """
        if position > self.sequencer.sealed_frontier:
            raise UnsealedRange(
                f"{position} supera la frontera sellada {self.sequencer.sealed_frontier}"
            )
        while self.position < position:
            siguiente = self.position + 1
            batch = self.sequencer.batch_of(siguiente)
            try:
                if self.parallel and siguiente == batch.start and batch.end <= position and len(batch) > 1:
                    self.parallel_apply(batch)
                    continue
                entry = self.sequencer.read(siguiente, siguiente)[0]
                outcome = self.procesar(self.runtime, entry)
            except EffectGap:
                logger.info("Nodo %s detenido en %d: faltan efectos", self.name, siguiente)
                raise
            self._avanzar(entry, outcome, batch)
        return self.frontier

    def _avanzar(self, entry, outcome, batch):
        self.outcomes[entry.position] = outcome
        if self.profile.archival and outcome.status in ('ok', 'failed'):
            self.records[entry.position] = {r.index: r for r in records_from_outcome(outcome)}
        self.position = entry.position
        self.frontier.global_position = entry.position
        for service in self.frontier.services:
            self.frontier.services[service] = entry.position
        if entry.position == batch.end:
            self._cerrar_batch(batch)

    def _cerrar_batch(self, batch):
        for space in self.runtime.spaces.values():
            try:
                space.snapshot(batch.end)
            except NonMonotonicPosition:
                pass
        logger.info("Nodo %s: frontera %d (batch %d)", self.name, batch.end, batch.number)
        if self.data_dir is not None:
            self.persist(batch)

    # ==================== PARALELO ====================

    def _cierre_declarado(self, service):
        """Servicios alcanzables por los callees declarados desde `service`."""
        vistos = {service}
        pendientes = [service]
        while pendientes:
            actual = pendientes.pop()
            bundle = self.runtime.bundles.get(actual)
            if bundle is None:
                continue
            for callee in bundle.callees - vistos:
                vistos.add(callee)
                pendientes.append(callee)
        return vistos

    def _touch_set(self, entry):
        if self.runtime.hosts(entry.target):
            toca = self._cierre_declarado(entry.target)
            if toca <= self.hosted:
                return frozenset(toca)
        else:
            toca = {entry.target}
        registros = self.resolver(entry.position)
        toca |= {r.target for r in registros.values() if self.runtime.hosts(r.target)}
        return frozenset(toca)

    def _grupos(self, entries):
        """
        Unión de entradas cuyos touch-sets se intersecan; cada grupo conserva
        el orden global
        """
        padre = list(range(len(entries)))

        def raiz(i):
            while padre[i] != i:
                padre[i] = padre[padre[i]]
                i = padre[i]
            return i

        duenio = {}
        touch = []
        for i, entry in enumerate(entries):
            toca = self._touch_set(entry)
            touch.append(toca)
            for service in toca:
                if service in duenio:
                    padre[raiz(i)] = raiz(duenio[service])
                else:
                    duenio[service] = i
        grupos = {}
        for i in range(len(entries)):
            grupos.setdefault(raiz(i), []).append((entries[i], touch[i]))
        return [grupos[k] for k in sorted(grupos)]

    def _ejecutar_grupo(self, grupo):
        return [(entry, self.procesar(self.runtime, entry, allowed=toca)) for entry, toca in grupo]

    def parallel_apply(self, batch):
        """
        Ejecuta el batch agrupando entradas por servicios tocados; los grupos
        disjuntos corren en paralelo. Una llamada no declarada revierte el
        batch completo y lo reejecuta en serie.
        """
        if batch.start <= self.position:
            raise ValueError(f"El batch {batch.number} ya fue aplicado")
        entries = self.sequencer.read(batch.start, batch.end)
        grupos = self._grupos(entries)
        spaces = list(self.runtime.spaces.values())
        for space in spaces:
            space.begin()
        try:
            with ThreadPoolExecutor(max_workers=max(1, min(len(grupos), MAX_WORKERS))) as pool:
                futuros = [pool.submit(self._ejecutar_grupo, grupo) for grupo in grupos]
                resultados = [f.result() for f in futuros]
        except UndeclaredCall as e:
            for space in spaces:
                space.rollback()
            logger.warning("Batch %d: %s; se reejecuta en serie", batch.number, e.message)
            for entry in entries:
                self._avanzar(entry, self.procesar(self.runtime, entry), batch)
            return self.frontier
        except BaseException:
            for space in spaces:
                space.rollback()
            raise
        for space in spaces:
            space.commit()
        pares = sorted((par for grupo in resultados for par in grupo), key=lambda par: par[0].position)
        for entry, outcome in pares:
            self._avanzar(entry, outcome, batch)
        return self.frontier

    # ==================== PERSISTENCIA ====================

    def persist(self, batch=None):
        for space in self.runtime.spaces.values():
            space.persist()
        try:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            if self.profile.archival and batch is not None:
                with open(self.data_dir / EFFECTS_NAME, 'a', encoding='utf-8') as f:
                    for position in range(batch.start, batch.end + 1):
                        for registro in sorted(self.records.get(position, {}).values(), key=lambda r: r.index):
                            f.write(json.dumps(registro.to_dict(), sort_keys=True) + '\n')
            (self.data_dir / FRONTIER_NAME).write_text(
                json.dumps(self.frontier.to_dict(), sort_keys=True, indent=2), encoding='utf-8',
            )
        except OSError as e:
            raise StoreUnavailable(f"No se pudo persistir el nodo {self.name}: {e}") from None

    def _cargar(self):
        if self.data_dir is None or not (self.data_dir / FRONTIER_NAME).exists():
            return
        datos = json.loads((self.data_dir / FRONTIER_NAME).read_text(encoding='utf-8'))
        self.position = datos['global']
        efectos = self.data_dir / EFFECTS_NAME
        if efectos.exists():
            for linea in efectos.read_text(encoding='utf-8').splitlines():
                registro = EffectRecord.from_dict(json.loads(linea))
                self.records.setdefault(registro.position, {})[registro.index] = registro
        logger.info("Nodo %s reabierto en la posición %d", self.name, self.position)

"""
Servicio de demostración UPC: shares y blobs por nodo en la región de
instancia, lista de miembros y quórum en la región de red.
"""
import json

from Lyquid.bundle import LyquidBundle, register_handler
from Lyquid.valor import digest
from Upc.call import Aggregator, Selector, UpcCall

KIND = 'upc_demo'

PLAZO = 20
PLAZO_ANIDADO = 8


# ==================== RED ====================

def set_members(ctx, miembros):
    ctx.network['members'].set(list(miembros))
    return True


def set_quorum(ctx, quorum):
    ctx.network['quorum'].set(quorum)
    return True


def set_blob_digest(ctx, valor):
    ctx.network['blob_digest'].set(valor)
    return True


def members_view(ctx):
    return ctx.network['members'].get()


# ==================== HANDLERS ====================

def get_share(ctx):
    visto = ctx.instance['seen']
    visto.set(visto.get() + 1)
    return ctx.instance['share'].get()


def fetch(ctx):
    return ctx.instance['blob'].get()


def whoami(ctx):
    return ctx.node_id


def group_sum(ctx, grupo):
    return ctx.upc.invoke(UpcCall(
        ctx.service, 'get_share',
        selector=Selector('listed', nodes=tuple(grupo)),
        aggregator=Aggregator('collect_all', 'sum'),
        quorum=len(grupo), deadline=PLAZO_ANIDADO,
    ))


def lead_group(ctx, grupos):
    """Cada líder suma las shares de su propio grupo con una UPC anidada."""
    for grupo in grupos:
        if grupo and grupo[0] == ctx.node_id:
            return group_sum(ctx, grupo)
    return 0


def recurse(ctx, n):
    if n == 0:
        return 0
    return 1 + ctx.upc.invoke(UpcCall(
        ctx.service, 'recurse', (n - 1,),
        selector=Selector('first_k', k=1), aggregator=Aggregator('single_node'),
        deadline=PLAZO,
    ))


def touch_network(ctx):
    ctx.network['quorum'].set(0)
    return True


# ==================== INSTANCIA (entrada por gateway) ====================

def sum_shares(ctx, k):
    return ctx.upc.invoke(UpcCall(
        ctx.service, 'get_share',
        aggregator=Aggregator('threshold_shares', 'sum', k=k), deadline=PLAZO,
    ))


def collect_shares(ctx, reducer):
    return ctx.upc.invoke(UpcCall(
        ctx.service, 'get_share',
        aggregator=Aggregator('collect_all', reducer), deadline=PLAZO,
    ))


def members_sum(ctx):
    return ctx.upc.invoke(UpcCall(
        ctx.service, 'get_share',
        selector=Selector('filtered', root='members'),
        aggregator=Aggregator('collect_all', 'sum'), deadline=PLAZO,
        quorum_root='quorum',
    ))


def fetch_blob(ctx):
    esperado = ctx.network['blob_digest'].get()
    return ctx.upc.invoke(UpcCall(
        ctx.service, 'fetch',
        aggregator=Aggregator('first_valid', expected_digest=esperado or None),
        deadline=PLAZO,
    ))


def nested_sum(ctx, grupos):
    lideres = tuple(grupo[0] for grupo in grupos if grupo)
    return ctx.upc.invoke(UpcCall(
        ctx.service, 'lead_group', (grupos,),
        selector=Selector('listed', nodes=lideres),
        aggregator=Aggregator('collect_all', 'sum'),
        quorum=len(lideres), deadline=PLAZO,
    ))


def recurse_from(ctx, n):
    return ctx.upc.invoke(UpcCall(
        ctx.service, 'recurse', (n,),
        selector=Selector('first_k', k=1), aggregator=Aggregator('single_node'),
        deadline=PLAZO * 2,
    ))


def upc(ctx, descripcion):
    """UPC arbitraria descrita en JSON (forma de UpcCall.from_dict)."""
    return ctx.upc.invoke(UpcCall.from_dict(json.loads(descripcion)))


def blob_digest_of(ctx, blob):
    return digest(blob)


def build(name, members=(), quorum=1, blob_digest=''):
    bundle = (
        LyquidBundle(name, KIND)
        .with_root('network', 'members', 'list', list(members))
        .with_root('network', 'quorum', 'u256', quorum)
        .with_root('network', 'blob_digest', 'string', blob_digest)
        .with_root('instance', 'share', 'u256', 0)
        .with_root('instance', 'blob', 'bytes', b'')
        .with_root('instance', 'seen', 'u256', 0)
        .with_network_method('set_members', set_members)
        .with_network_method('set_quorum', set_quorum)
        .with_network_method('set_blob_digest', set_blob_digest)
        .with_network_method('members', members_view, view=True)
        .with_instance_method('sum_shares', sum_shares)
        .with_instance_method('collect_shares', collect_shares)
        .with_instance_method('members_sum', members_sum)
        .with_instance_method('fetch_blob', fetch_blob)
        .with_instance_method('nested_sum', nested_sum)
        .with_instance_method('recurse_from', recurse_from)
        .with_instance_method('upc', upc)
        .with_instance_method('blob_digest_of', blob_digest_of)
    )
    for nombre, behavior in (
        ('get_share', get_share), ('fetch', fetch), ('whoami', whoami),
        ('group_sum', group_sum), ('lead_group', lead_group),
        ('recurse', recurse), ('touch_network', touch_network),
    ):
        bundle = register_handler(bundle, nombre, behavior)
    return bundle

"""
Router: encamina swaps hacia DEXes (cadena router → dex → token).
"""
from Lyquid.bundle import LyquidBundle

KIND = 'router'


def route(ctx, dex, dx):
    dexes = ctx.network['dexes'].get()
    ctx.require(dex in dexes, 'unknown-dex')
    dy = ctx.call(dex, 'swap_for', ctx.caller, dx)
    volumen = ctx.network['routed']
    volumen.set(ctx.add(volumen.get(), dx))
    return dy


def routed(ctx):
    return ctx.network['routed'].get()


def build(name, dexes):
    return (
        LyquidBundle(name, KIND)
        .with_root('network', 'dexes', 'value', list(dexes))
        .with_root('network', 'routed', 'u256', 0)
        .with_network_method('route', route, set(dexes))
        .with_network_method('routed', routed, view=True)
    )

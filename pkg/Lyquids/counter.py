"""
Contador; `spin` es un bucle sin cota que solo termina por gas.
"""
from Lyquid.bundle import LyquidBundle

KIND = 'counter'


def increment(ctx, by=1):
    cuenta = ctx.network['count']
    cuenta.set(ctx.add(cuenta.get(), by))
    return cuenta.get()


def spin(ctx):
    cuenta = ctx.network['count']
    cuenta.set(ctx.add(cuenta.get(), 1))
    while True:
        ctx.tick()


def poke(ctx, target):
    """Llama a otro contador sin declararlo (fuerza el camino serial)."""
    return ctx.call(target, 'increment', 1)


def value(ctx):
    return ctx.network['count'].get()


def hit(ctx):
    visitas = ctx.instance['hits']
    visitas.set(visitas.get() + 1)
    return visitas.get()


def build(name, start=0):
    return (
        LyquidBundle(name, KIND)
        .with_root('network', 'count', 'u256', start)
        .with_root('instance', 'hits', 'u256', 0)
        .with_network_method('increment', increment)
        .with_network_method('spin', spin)
        .with_network_method('poke', poke)
        .with_network_method('value', value, view=True)
        .with_instance_method('hit', hit)
    )

"""
DEX de producto constante entre un crédito interno y un token ERC-20.

`swap` cobra tokens del usuario (transfer_from) y entrega créditos;
`swap_back` quema créditos y paga tokens con `transfer` desde el propio pool.
"""
from Lyquid.bundle import LyquidBundle

KIND = 'dex'


def salida(reserva_in, reserva_out, monto_in):
    """
    Salida de producto constante con redondeo hacia abajo; debe cumplir
    x'·y' >= x·y, así que (1000, 1000, 100) da 90: con 91 el producto baja
    """
    return reserva_out * monto_in // (reserva_in + monto_in)


def _cobrar_y_acreditar(ctx, usuario, dx):
    ctx.require(dx > 0, 'zero-input')
    reserva_token = ctx.network['reserve_token']
    reserva_credito = ctx.network['reserve_credit']
    x, y = reserva_token.get(), reserva_credito.get()
    dy = ctx.div(ctx.mul(y, dx), ctx.add(x, dx))
    ctx.require(dy > 0, 'zero-output')
    ctx.call(ctx.network['token'].get(), 'transfer_from', usuario, ctx.address, dx)
    reserva_token.set(ctx.add(x, dx))
    reserva_credito.set(ctx.sub(y, dy))
    creditos = ctx.network['credits']
    creditos.set(usuario, ctx.add(creditos.get(usuario, 0), dy))
    ctx.emit('Swap', [usuario, dx, dy])
    return dy


def swap(ctx, dx):
    return _cobrar_y_acreditar(ctx, ctx.caller, dx)


def swap_for(ctx, usuario, dx):
    """Swap a nombre de `usuario` (lo usa el router); gasta su allowance al pool."""
    return _cobrar_y_acreditar(ctx, usuario, dx)


def swap_back(ctx, monto):
    ctx.require(monto > 0, 'zero-input')
    creditos = ctx.network['credits']
    saldo = creditos.get(ctx.caller, 0)
    ctx.require(saldo >= monto, 'insufficient')
    reserva_token = ctx.network['reserve_token']
    reserva_credito = ctx.network['reserve_credit']
    x, y = reserva_token.get(), reserva_credito.get()
    dx = ctx.div(ctx.mul(x, monto), ctx.add(y, monto))
    ctx.require(dx > 0, 'zero-output')
    creditos.set(ctx.caller, ctx.sub(saldo, monto))
    reserva_credito.set(ctx.add(y, monto))
    reserva_token.set(ctx.sub(x, dx))
    ctx.call(ctx.network['token'].get(), 'transfer', ctx.caller, dx)
    return dx


def transfer_credit(ctx, to, monto):
    creditos = ctx.network['credits']
    saldo = creditos.get(ctx.caller, 0)
    ctx.require(saldo >= monto, 'insufficient')
    creditos.set(ctx.caller, ctx.sub(saldo, monto))
    creditos.set(to, ctx.add(creditos.get(to, 0), monto))
    return True


def quote(ctx, dx):
    return salida(ctx.network['reserve_token'].get(), ctx.network['reserve_credit'].get(), dx)


def reserves(ctx):
    return [ctx.network['reserve_token'].get(), ctx.network['reserve_credit'].get()]


def credit_of(ctx, who):
    return ctx.network['credits'].get(who, 0)


def build(name, token, reserve_token=1000, reserve_credit=1000, credits=None):
    callees = {token}
    return (
        LyquidBundle(name, KIND)
        .with_root('network', 'token', 'string', token)
        .with_root('network', 'reserve_token', 'u256', reserve_token)
        .with_root('network', 'reserve_credit', 'u256', reserve_credit)
        .with_root('network', 'credits', 'map', dict(credits or {}))
        .with_network_method('swap', swap, callees)
        .with_network_method('swap_for', swap_for, callees)
        .with_network_method('swap_back', swap_back, callees)
        .with_network_method('transfer_credit', transfer_credit)
        .with_network_method('quote', quote, view=True)
        .with_network_method('reserves', reserves, view=True)
        .with_network_method('credit_of', credit_of, view=True)
    )

"""
Token ERC-20: saldos y allowances en la región de red, diario local de
transacciones en la región de instancia.
"""
from Lyquid.bundle import LyquidBundle

KIND = 'erc20'


# ==================== RED ====================

def transfer(ctx, to, amount):
    balances = ctx.network['balances']
    origen = ctx.caller
    saldo = balances.get(origen, 0)
    ctx.require(saldo >= amount, 'insufficient', f"Saldo {saldo} < {amount}")
    balances.set(origen, ctx.sub(saldo, amount))
    balances.set(to, ctx.add(balances.get(to, 0), amount))
    ctx.emit('Transfer', [origen, to, amount])
    return True


def approve(ctx, spender, amount):
    ctx.network['allowances'].set([ctx.caller, spender], amount)
    ctx.emit('Approval', [ctx.caller, spender, amount])
    return True


def transfer_from(ctx, owner, to, amount):
    allowances = ctx.network['allowances']
    permitido = allowances.get([owner, ctx.caller], 0)
    ctx.require(permitido >= amount, 'allowance', f"Allowance {permitido} < {amount}")
    balances = ctx.network['balances']
    saldo = balances.get(owner, 0)
    ctx.require(saldo >= amount, 'insufficient', f"Saldo {saldo} < {amount}")
    allowances.set([owner, ctx.caller], ctx.sub(permitido, amount))
    balances.set(owner, ctx.sub(saldo, amount))
    balances.set(to, ctx.add(balances.get(to, 0), amount))
    ctx.emit('Transfer', [owner, to, amount])
    return True


def mint(ctx, to, amount):
    ctx.require(ctx.caller == ctx.network['owner'].get(), 'not-owner')
    supply = ctx.network['total_supply']
    supply.set(ctx.add(supply.get(), amount))
    balances = ctx.network['balances']
    balances.set(to, ctx.add(balances.get(to, 0), amount))
    ctx.emit('Transfer', [ctx.caller, to, amount])
    return True


def balance_of(ctx, who):
    return ctx.network['balances'].get(who, 0)


def allowance(ctx, owner, spender):
    return ctx.network['allowances'].get([owner, spender], 0)


def total(ctx):
    return ctx.network['total_supply'].get()


# ==================== INSTANCIA ====================

def record_transaction(ctx, nota):
    diario = ctx.instance['local_transactions']
    diario.append([ctx.caller, nota])
    return len(diario)


def local_count(ctx):
    return len(ctx.instance['local_transactions'])


def supply_seen(ctx):
    return ctx.network['total_supply'].get()


def burn_locally(ctx, amount):
    """Intenta escribir estado de red desde una instancia (siempre falla)."""
    supply = ctx.network['total_supply']
    supply.set(ctx.sub(supply.get(), amount))
    return True


def build(name, owner, balances=None, allowances=None):
    """
    Bundle del token; total_supply arranca como la suma de los saldos iniciales
    """
    balances = dict(balances or {})
    permisos = {(o, s): monto for o, s, monto in (allowances or [])}
    return (
        LyquidBundle(name, KIND)
        .with_root('network', 'owner', 'address', owner)
        .with_root('network', 'total_supply', 'u256', sum(balances.values()))
        .with_root('network', 'balances', 'map', balances)
        .with_root('network', 'allowances', 'map', permisos)
        .with_root('instance', 'local_transactions', 'list', [])
        .with_network_method('transfer', transfer)
        .with_network_method('approve', approve)
        .with_network_method('transfer_from', transfer_from)
        .with_network_method('mint', mint)
        .with_network_method('balance_of', balance_of, view=True)
        .with_network_method('allowance', allowance, view=True)
        .with_network_method('total', total, view=True)
        .with_instance_method('record_transaction', record_transaction)
        .with_instance_method('local_count', local_count)
        .with_instance_method('supply_seen', supply_seen)
        .with_instance_method('burn_locally', burn_locally)
    )

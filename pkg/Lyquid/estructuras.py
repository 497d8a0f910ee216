"""
Contenedores que viven directamente en la memoria DMA de un servicio.

Cada raíz declarada apunta a un slot fijo asignado en su región:

- u256 / bool / address: celda de ancho fijo.
- bytes / string / value: caja `[ptr u32][largo u32]` hacia un bloque con los
  bytes crudos, el UTF-8 o la codificación canónica del Value.
- list: `[largo u32][capacidad u32][datos u32]`, datos = punteros a bloques
  `[largo u32][Value codificado]`.
- map: misma cabecera; datos = punteros a entradas ordenadas por la
  codificación de la clave, búsqueda binaria. Entrada:
  `[largo clave u32][largo valor u32][ptr valor u32][clave]`. Sin hashing.

Todo acceso pasa por `Acceso`, que cobra gas por operación de memoria.
"""
import struct

from Comun.errores import MethodError
from Lyquid.valor import Address, decode, encode, es_u256

CABECERA = struct.Struct('<III')
CAJA = struct.Struct('<II')
U32 = struct.Struct('<I')
ENTRADA = struct.Struct('<III')

TAM_CELDA = {'u256': 32, 'bool': 1, 'address': 20}
VALOR_VACIO = {'bytes': b'', 'string': '', 'value': []}


def costo_memoria(n):
    return max(1, -(-n // 32))


class Acceso:
    """Lectura/escritura/asignación sobre una región, con cobro de gas."""

    def __init__(self, space, region, cobrar=None):
        self.space = space
        self.region = region
        self._cobrar = cobrar

    def _cobro(self, n):
        if self._cobrar is not None:
            self._cobrar(costo_memoria(n))

    def read(self, addr, n):
        self._cobro(n)
        return self.space.read(addr, n)

    def write(self, addr, data):
        self._cobro(len(data))
        self.space.write(addr, data)

    def alloc(self, size):
        self._cobro(size)
        return self.space.alloc(self.region, size)

    def free(self, addr):
        self._cobro(8)
        self.space.free(self.region, addr)

    def u32(self, addr):
        return U32.unpack(self.read(addr, 4))[0]

    def set_u32(self, addr, valor):
        self.write(addr, U32.pack(valor))


def verificar_tipo(tipo, valor):
    """
    Verifica que un Value sea compatible con la etiqueta de tipo de la raíz
    Returns: (bool, str) - (éxito, mensaje de error)
    """
    if tipo == 'u256' and not es_u256(valor):
        return False, f"Se esperaba u256, se recibió {valor!r}"
    if tipo == 'bool' and not isinstance(valor, bool):
        return False, f"Se esperaba bool, se recibió {valor!r}"
    if tipo == 'address' and not isinstance(valor, Address):
        return False, f"Se esperaba address, se recibió {valor!r}"
    if tipo == 'bytes' and not isinstance(valor, (bytes, bytearray)):
        return False, f"Se esperaba bytes, se recibió {valor!r}"
    if tipo == 'string' and not isinstance(valor, str):
        return False, f"Se esperaba string, se recibió {valor!r}"
    if tipo == 'list' and not isinstance(valor, (list, tuple)):
        return False, f"Se esperaba list, se recibió {valor!r}"
    if tipo == 'map' and not isinstance(valor, dict):
        return False, f"Se esperaba map, se recibió {valor!r}"
    return True, None


def _exigir_tipo(tipo, valor):
    exito, error_msg = verificar_tipo(tipo, valor)
    if not exito:
        raise MethodError('type-mismatch', error_msg)


# ==================== CELDAS Y CAJAS ====================

class Celda:

    def __init__(self, acceso, addr, tipo):
        self.acceso = acceso
        self.addr = addr
        self.tipo = tipo

    def get(self):
        crudo = self.acceso.read(self.addr, TAM_CELDA[self.tipo])
        if self.tipo == 'u256':
            return int.from_bytes(crudo, 'little')
        if self.tipo == 'bool':
            return crudo != b'\x00'
        return Address(crudo)

    def set(self, valor):
        _exigir_tipo(self.tipo, valor)
        if self.tipo == 'u256':
            crudo = valor.to_bytes(32, 'little')
        elif self.tipo == 'bool':
            crudo = b'\x01' if valor else b'\x00'
        else:
            crudo = valor.raw
        self.acceso.write(self.addr, crudo)

    valor = get


def _escribir_bloque(acceso, ptr_actual, datos):
    """
    Reutiliza el bloque si alcanza; si no, libera y asigna uno nuevo
    Returns: int - puntero al bloque con `datos`
    """
    if ptr_actual and acceso.space.allocators[acceso.region].block_size(ptr_actual) >= len(datos):
        ptr = ptr_actual
    else:
        if ptr_actual:
            acceso.free(ptr_actual)
        ptr = acceso.alloc(max(1, len(datos)))
    if datos:
        acceso.write(ptr, datos)
    return ptr


class Caja:

    def __init__(self, acceso, addr, tipo):
        self.acceso = acceso
        self.addr = addr
        self.tipo = tipo

    def get(self):
        ptr, largo = CAJA.unpack(self.acceso.read(self.addr, CAJA.size))
        if not ptr:
            return VALOR_VACIO[self.tipo]
        crudo = self.acceso.read(ptr, largo)
        if self.tipo == 'bytes':
            return crudo
        if self.tipo == 'string':
            return crudo.decode('utf-8')
        return decode(crudo)

    def set(self, valor):
        _exigir_tipo(self.tipo, valor)
        if self.tipo == 'bytes':
            datos = bytes(valor)
        elif self.tipo == 'string':
            datos = valor.encode('utf-8')
        else:
            datos = encode(valor)
        ptr_actual, _ = CAJA.unpack(self.acceso.read(self.addr, CAJA.size))
        ptr = _escribir_bloque(self.acceso, ptr_actual, datos)
        self.acceso.write(self.addr, CAJA.pack(ptr, len(datos)))

    valor = get


# ==================== VECTOR ====================

class Vector:

    def __init__(self, acceso, addr):
        self.acceso = acceso
        self.addr = addr

    def _cabecera(self):
        return CABECERA.unpack(self.acceso.read(self.addr, CABECERA.size))

    def __len__(self):
        return self._cabecera()[0]

    def _ptr(self, i):
        largo, _cap, datos = self._cabecera()
        if i < 0:
            i += largo
        if not 0 <= i < largo:
            raise MethodError('index-out-of-range', f"Índice {i} fuera de rango ({largo})")
        return datos + 4 * i

    def _leer_item(self, ptr_item):
        largo = self.acceso.u32(ptr_item)
        return decode(self.acceso.read(ptr_item + 4, largo))

    def _nuevo_item(self, valor):
        datos = encode(valor)
        ptr = self.acceso.alloc(4 + len(datos))
        self.acceso.write(ptr, U32.pack(len(datos)) + datos)
        return ptr

    def get(self, i):
        return self._leer_item(self.acceso.u32(self._ptr(i)))

    def set(self, i, valor):
        slot = self._ptr(i)
        viejo = self.acceso.u32(slot)
        self.acceso.set_u32(slot, self._nuevo_item(valor))
        self.acceso.free(viejo)

    def append(self, valor):
        largo, cap, datos = self._cabecera()
        if largo == cap:
            nueva_cap = max(4, cap * 2)
            nuevos = self.acceso.alloc(4 * nueva_cap)
            if largo:
                self.acceso.write(nuevos, self.acceso.read(datos, 4 * largo))
                self.acceso.free(datos)
            cap, datos = nueva_cap, nuevos
        self.acceso.set_u32(datos + 4 * largo, self._nuevo_item(valor))
        self.acceso.write(self.addr, CABECERA.pack(largo + 1, cap, datos))

    def pop(self):
        largo, cap, datos = self._cabecera()
        if not largo:
            raise MethodError('empty', "pop sobre una lista vacía")
        ptr_item = self.acceso.u32(datos + 4 * (largo - 1))
        valor = self._leer_item(ptr_item)
        self.acceso.free(ptr_item)
        self.acceso.write(datos + 4 * (largo - 1), U32.pack(0))
        self.acceso.write(self.addr, CABECERA.pack(largo - 1, cap, datos))
        return valor

    def items(self):
        largo, _cap, datos = self._cabecera()
        if not largo:
            return []
        punteros = struct.unpack(f'<{largo}I', self.acceso.read(datos, 4 * largo))
        return [self._leer_item(p) for p in punteros]

    def set_all(self, valores):
        for valor in valores:
            self.append(valor)

    valor = items


# ==================== MAPA ====================

class Mapa:

    def __init__(self, acceso, addr):
        self.acceso = acceso
        self.addr = addr

    def _cabecera(self):
        return CABECERA.unpack(self.acceso.read(self.addr, CABECERA.size))

    def __len__(self):
        return self._cabecera()[0]

    def _entrada(self, ptr):
        largo_clave, largo_valor, ptr_valor = ENTRADA.unpack(self.acceso.read(ptr, ENTRADA.size))
        return largo_clave, largo_valor, ptr_valor

    def _clave(self, ptr):
        largo_clave = self.acceso.u32(ptr)
        return self.acceso.read(ptr + ENTRADA.size, largo_clave)

    def _buscar(self, clave):
        """
        Búsqueda binaria sobre las claves codificadas
        Returns: (bool, int, int) - (encontrada, índice, puntero de la entrada)
        """
        largo, _cap, datos = self._cabecera()
        bajo, alto = 0, largo
        while bajo < alto:
            medio = (bajo + alto) // 2
            ptr = self.acceso.u32(datos + 4 * medio)
            actual = self._clave(ptr)
            if actual == clave:
                return True, medio, ptr
            if actual < clave:
                bajo = medio + 1
            else:
                alto = medio
        return False, bajo, 0

    def get(self, clave, default=None):
        encontrada, _i, ptr = self._buscar(encode(clave))
        if not encontrada:
            return default
        _lk, largo_valor, ptr_valor = self._entrada(ptr)
        return decode(self.acceso.read(ptr_valor, largo_valor))

    def __contains__(self, clave):
        return self._buscar(encode(clave))[0]

    contains = __contains__

    def set(self, clave, valor):
        clave_cod = encode(clave)
        valor_cod = encode(valor)
        encontrada, indice, ptr = self._buscar(clave_cod)
        if encontrada:
            _lk, _lv, ptr_valor = self._entrada(ptr)
            ptr_valor = _escribir_bloque(self.acceso, ptr_valor, valor_cod)
            self.acceso.write(ptr + 4, struct.pack('<II', len(valor_cod), ptr_valor))
            return

        ptr_valor = self.acceso.alloc(max(1, len(valor_cod)))
        self.acceso.write(ptr_valor, valor_cod)
        ptr = self.acceso.alloc(ENTRADA.size + len(clave_cod))
        self.acceso.write(ptr, ENTRADA.pack(len(clave_cod), len(valor_cod), ptr_valor) + clave_cod)

        largo, cap, datos = self._cabecera()
        if largo == cap:
            nueva_cap = max(4, cap * 2)
            nuevos = self.acceso.alloc(4 * nueva_cap)
            if largo:
                self.acceso.write(nuevos, self.acceso.read(datos, 4 * largo))
                self.acceso.free(datos)
            cap, datos = nueva_cap, nuevos
        if indice < largo:
            cola = self.acceso.read(datos + 4 * indice, 4 * (largo - indice))
            self.acceso.write(datos + 4 * (indice + 1), cola)
        self.acceso.set_u32(datos + 4 * indice, ptr)
        self.acceso.write(self.addr, CABECERA.pack(largo + 1, cap, datos))

    def delete(self, clave):
        encontrada, indice, ptr = self._buscar(encode(clave))
        if not encontrada:
            return False
        largo, cap, datos = self._cabecera()
        _lk, _lv, ptr_valor = self._entrada(ptr)
        if indice < largo - 1:
            cola = self.acceso.read(datos + 4 * (indice + 1), 4 * (largo - indice - 1))
            self.acceso.write(datos + 4 * indice, cola)
        self.acceso.write(datos + 4 * (largo - 1), U32.pack(0))
        self.acceso.write(self.addr, CABECERA.pack(largo - 1, cap, datos))
        self.acceso.free(ptr_valor)
        self.acceso.free(ptr)
        return True

    def items(self):
        largo, _cap, datos = self._cabecera()
        if not largo:
            return []
        salida = []
        for ptr in struct.unpack(f'<{largo}I', self.acceso.read(datos, 4 * largo)):
            largo_clave, largo_valor, ptr_valor = self._entrada(ptr)
            clave = decode(self.acceso.read(ptr + ENTRADA.size, largo_clave))
            salida.append((clave, decode(self.acceso.read(ptr_valor, largo_valor))))
        return salida

    def keys(self):
        return [clave for clave, _ in self.items()]

    def valor(self):
        return {(tuple(k) if isinstance(k, list) else k): v for k, v in self.items()}


# ==================== RAÍCES ====================

def handle_para(acceso, addr, tipo):
    if tipo in TAM_CELDA:
        return Celda(acceso, addr, tipo)
    if tipo in VALOR_VACIO:
        return Caja(acceso, addr, tipo)
    if tipo == 'list':
        return Vector(acceso, addr)
    return Mapa(acceso, addr)


def crear_raiz(acceso, nombre, tipo, inicial):
    """
    Asigna el slot de la raíz, lo registra en la tabla y aplica el inicializador
    """
    exito, error_msg = verificar_tipo(tipo, inicial)
    if not exito:
        raise ValueError(f"Inicializador inválido para '{nombre}': {error_msg}")
    if tipo in TAM_CELDA:
        tam = TAM_CELDA[tipo]
    elif tipo in VALOR_VACIO:
        tam = CAJA.size
    else:
        tam = CABECERA.size
    addr = acceso.alloc(tam)
    acceso.space.roots[acceso.region].add(nombre, addr, tipo)
    handle = handle_para(acceso, addr, tipo)
    if tipo == 'list':
        handle.set_all(inicial)
    elif tipo == 'map':
        for clave, valor in sorted(inicial.items(), key=lambda kv: encode(kv[0])):
            handle.set(clave, valor)
    elif tipo in VALOR_VACIO and inicial == VALOR_VACIO[tipo]:
        pass
    else:
        handle.set(inicial)
    return addr


class Raices:
    """Acceso por nombre a las raíces de una región: `ctx.network['balances']`."""

    def __init__(self, space, region, cobrar=None):
        self.space = space
        self.region = region
        self.acceso = Acceso(space, region, cobrar)

    def __getitem__(self, nombre):
        addr, tipo = self.space.roots[self.region].get(nombre)
        return handle_para(self.acceso, addr, tipo)

    def names(self):
        return list(self.space.roots[self.region].entries())

    def valores(self):
        return {nombre: self[nombre].valor() for nombre in self.names()}

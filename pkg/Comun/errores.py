"""
Excepciones compartidas por todos los paquetes.

Cada error lleva un `code` estable (se usa en trazas, registros de efectos y
respuestas del gateway) y un `status` estilo HTTP para los handlers.
"""


class LyquorError(Exception):
    code = 'lyquor-error'
    status = 500

    def __init__(self, message=None, **detalles):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.detalles = detalles

    def to_dict(self):
        return {'error': type(self).__name__, 'code': self.code, 'message': self.message}


# ==================== SECUENCIA ====================

class UnknownService(LyquorError):
    code = 'unknown-service'
    status = 404


class GasLimitExceeded(LyquorError):
    code = 'gas-limit-exceeded'
    status = 400


class InvalidIntent(LyquorError):
    code = 'invalid-intent'
    status = 400


class UnsealedRange(LyquorError):
    code = 'unsealed-range'
    status = 409


class CorruptLog(LyquorError):
    code = 'corrupt-log'
    status = 500


# ==================== MEMORIA ====================

class CorruptImage(LyquorError):
    code = 'corrupt-image'
    status = 500


class RegionViolation(LyquorError):
    code = 'region-violation'
    status = 403


class OutOfRange(LyquorError):
    code = 'out-of-range'
    status = 400


class OutOfMemory(LyquorError):
    code = 'out-of-memory'
    status = 507


class BadFree(LyquorError):
    code = 'bad-free'
    status = 400


class NonMonotonicPosition(LyquorError):
    code = 'non-monotonic-position'
    status = 409


class UnknownSnapshot(LyquorError):
    code = 'unknown-snapshot'
    status = 404


class StoreUnavailable(LyquorError):
    code = 'store-unavailable'
    status = 503


class UnknownRoot(LyquorError):
    code = 'unknown-root'
    status = 404


class DuplicateName(LyquorError):
    code = 'duplicate-name'
    status = 409


# ==================== LYQUID ====================

class ExecutionFailure(LyquorError):
    """Fallo determinista de una entrada: revierte y queda registrado."""
    status = 422


class MethodNotFound(ExecutionFailure):
    code = 'method-not-found'
    status = 404


class GasExhausted(ExecutionFailure):
    code = 'gas-exhausted'


class MethodError(ExecutionFailure):
    """Error de aplicación; `code` es el código que elige el método."""

    def __init__(self, code, message=None):
        super().__init__(message or code)
        self.code = code


class UnresolvedEffect(LyquorError):
    code = 'unresolved-effect'
    status = 409


class EffectDivergence(LyquorError):
    code = 'effect-divergence'
    status = 500


class UndeclaredCall(LyquorError):
    """Llamada interna fuera del conjunto declarado (solo en parallel_apply)."""
    code = 'undeclared-call'
    status = 409


def failure_from_code(code, message=None):
    """
    Reconstruye la excepción de fallo a partir de su código registrado
    """
    if code == GasExhausted.code:
        return GasExhausted(message)
    if code == MethodNotFound.code:
        return MethodNotFound(message)
    return MethodError(code, message)


# ==================== NODO ====================

class EffectGap(LyquorError):
    code = 'effect-gap'
    status = 409


class FrontierBehind(LyquorError):
    code = 'frontier-behind'
    status = 409


class NotHosted(LyquorError):
    code = 'not-hosted'
    status = 404


# ==================== UPC ====================

class QuorumNotMet(LyquorError):
    code = 'quorum-not-met'
    status = 504


class NoEligibleNodes(LyquorError):
    code = 'no-eligible-nodes'
    status = 503


class DepthExceeded(LyquorError):
    code = 'depth-exceeded'
    status = 508


# ==================== SIMULACION ====================

class PastStep(LyquorError):
    code = 'past-step'
    status = 400

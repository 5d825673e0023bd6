from typechain.typesys.chains import (
    REGISTRY,
    RMA,
    BaseKind,
    Channel,
    EffectiveAttributes,
    Everywhere,
    Role,
    Single,
    TypeChain,
    TypeConstructor,
    TypeSpec,
    register_type,
    resolve_chain,
)
from typechain.typesys.checker import check_program

__all__ = [
    "REGISTRY", "RMA", "BaseKind", "Channel", "EffectiveAttributes", "Everywhere", "Role",
    "Single", "TypeChain", "TypeConstructor", "TypeSpec", "check_program", "register_type",
    "resolve_chain",
]

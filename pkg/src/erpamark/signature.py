"""RSA-2048 signatures over perceptual hashes.

Deterministic PKCS#1 v1.5 padding with SHA-256 over the 8 hash bytes, so a
signature is exactly 2048 bits: 32 patches of 64 bits. Keys come from a seeded
prime search for reproducible fixtures. No side-channel hardening.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

from erpamark.bits import BitVector
from erpamark.phash import PerceptualHash

MODULUS_BITS = 2048
SIGNATURE_BITS = MODULUS_BITS
PUBLIC_EXPONENT = 65537
KEY_FORMAT_VERSION = 1

# DER prefix of DigestInfo for SHA-256 (RFC 8017, section 9.2 notes)
_SHA256_PREFIX = bytes.fromhex("3031300d060960864801650304020105000420")

_SMALL_PRIMES = [p for p in range(3, 2000) if all(p % q for q in range(2, math.isqrt(p) + 1))]


class KeyGenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class PublicKey:
    n: int
    e: int = PUBLIC_EXPONENT

    @property
    def bits(self) -> int:
        return self.n.bit_length()

    def to_dict(self) -> dict:
        return {"format_version": KEY_FORMAT_VERSION, "kind": "rsa-public", "n": format(self.n, "x"), "e": format(self.e, "x")}


@dataclass(frozen=True)
class SecretKey:
    n: int
    e: int
    d: int
    p: int
    q: int

    @property
    def public(self) -> PublicKey:
        return PublicKey(self.n, self.e)

    def to_dict(self) -> dict:
        out = {"format_version": KEY_FORMAT_VERSION, "kind": "rsa-secret"}
        out.update({k: format(getattr(self, k), "x") for k in ("n", "e", "d", "p", "q")})
        return out


@dataclass(frozen=True)
class KeyPair:
    public: PublicKey
    secret: SecretKey


def is_probable_prime(n: int, rounds: int = 40, rng: random.Random | None = None) -> bool:
    """Miller-Rabin with trial division by small primes first."""
    if n < 2:
        return False
    if n in (2, 3):
        return True
    if n % 2 == 0:
        return False
    for p in _SMALL_PRIMES:
        if n == p:
            return True
        if n % p == 0:
            return False
    rng = rng or random.Random(n)
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: random.Random, e: int, max_attempts: int) -> int:
    for _ in range(max_attempts):
        # top two bits set so the product has exactly 2 * bits bits
        cand = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        if math.gcd(e, cand - 1) != 1:
            continue
        if is_probable_prime(cand, rng=rng):
            return cand
    raise KeyGenerationError(f"no {bits}-bit prime after {max_attempts} candidates")


def keygen(seed: int = 0, bits: int = MODULUS_BITS, e: int = PUBLIC_EXPONENT, max_attempts: int = 50_000) -> KeyPair:
    rng = random.Random(f"erpamark-keygen:{seed}:{bits}")
    half = bits // 2
    p = _random_prime(half, rng, e, max_attempts)
    q = _random_prime(half, rng, e, max_attempts)
    while q == p:
        q = _random_prime(half, rng, e, max_attempts)
    n = p * q
    if n.bit_length() != bits:
        raise KeyGenerationError(f"modulus has {n.bit_length()} bits, expected {bits}")
    lam = math.lcm(p - 1, q - 1)
    d = pow(e, -1, lam)
    sk = SecretKey(n, e, d, p, q)
    return KeyPair(sk.public, sk)


def encode_message(hash_bytes: bytes, k: int) -> bytes:
    """EMSA-PKCS1-v1_5 encoding of SHA-256(hash_bytes) into k bytes."""
    t = _SHA256_PREFIX + hashlib.sha256(hash_bytes).digest()
    if k < len(t) + 11:
        raise ValueError("modulus too short for the padding")
    return b"\x00\x01" + b"\xff" * (k - len(t) - 3) + b"\x00" + t


def _modulus_bytes(n: int) -> int:
    return (n.bit_length() + 7) // 8


def sign(sk: SecretKey, h: PerceptualHash) -> BitVector:
    k = _modulus_bytes(sk.n)
    m = int.from_bytes(encode_message(h.to_bytes(), k), "big")
    # CRT exponentiation
    sp = pow(m, sk.d % (sk.p - 1), sk.p)
    sq = pow(m, sk.d % (sk.q - 1), sk.q)
    s = sq + sk.q * ((pow(sk.q, -1, sk.p) * (sp - sq)) % sk.p)
    return BitVector(s, 8 * k)


def verify(pk: PublicKey, h: PerceptualHash, sig: BitVector) -> bool:
    try:
        k = _modulus_bytes(pk.n)
        if not isinstance(sig, BitVector) or sig.length != 8 * k or sig.value >= pk.n:
            return False
        em = pow(sig.value, pk.e, pk.n).to_bytes(k, "big")
        return em == encode_message(h.to_bytes(), k)
    except (ValueError, TypeError, AttributeError, OverflowError):
        return False


def save_key(key: PublicKey | SecretKey, path: str | Path) -> None:
    Path(path).write_text(json.dumps(key.to_dict(), indent=1) + "\n")


def load_key(path: str | Path) -> PublicKey | SecretKey:
    d = json.loads(Path(path).read_text())
    if d.get("format_version") != KEY_FORMAT_VERSION:
        raise ValueError(f"unsupported key format_version {d.get('format_version')!r}")
    if d.get("kind") == "rsa-public":
        return PublicKey(int(d["n"], 16), int(d["e"], 16))
    if d.get("kind") == "rsa-secret":
        return SecretKey(*(int(d[k], 16) for k in ("n", "e", "d", "p", "q")))
    raise ValueError(f"unknown key kind {d.get('kind')!r}")


def public_of(key: PublicKey | SecretKey) -> PublicKey:
    return key.public if isinstance(key, SecretKey) else key

# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled SHA-256 Merkle kernels (OpenSSL EVP).

Same contract as vanetrust._kernel_py; selected by vanetrust.kernel when the
extension built. The win over hashlib is batching: one EVP context reused
across an entire tree level instead of a Python object per node.
"""

from cpython.bytes cimport PyBytes_FromStringAndSize, PyBytes_AsStringAndSize
from libc.string cimport memcpy

cdef extern from "openssl/evp.h":
    ctypedef struct EVP_MD_CTX
    ctypedef struct EVP_MD
    ctypedef struct ENGINE
    const EVP_MD *EVP_sha256()
    EVP_MD_CTX *EVP_MD_CTX_new()
    void EVP_MD_CTX_free(EVP_MD_CTX *ctx)
    int EVP_DigestInit_ex(EVP_MD_CTX *ctx, const EVP_MD *type, ENGINE *impl)
    int EVP_DigestUpdate(EVP_MD_CTX *ctx, const void *d, size_t cnt)
    int EVP_DigestFinal_ex(EVP_MD_CTX *ctx, unsigned char *md, unsigned int *s)

DEF DIGEST = 32

DIGEST_LEN = DIGEST

BACKEND = "compiled"


cdef class _Ctx:
    cdef EVP_MD_CTX *ctx

    def __cinit__(self):
        self.ctx = EVP_MD_CTX_new()
        if self.ctx == NULL:
            raise MemoryError("EVP_MD_CTX_new failed")

    def __dealloc__(self):
        if self.ctx != NULL:
            EVP_MD_CTX_free(self.ctx)


cdef inline int _digest(EVP_MD_CTX *ctx, const unsigned char *a, size_t la,
                        const unsigned char *b, size_t lb,
                        const unsigned char *c, size_t lc,
                        unsigned char *out) except -1:
    if EVP_DigestInit_ex(ctx, EVP_sha256(), NULL) != 1:
        raise RuntimeError("EVP_DigestInit_ex failed")
    if la and EVP_DigestUpdate(ctx, a, la) != 1:
        raise RuntimeError("EVP_DigestUpdate failed")
    if lb and EVP_DigestUpdate(ctx, b, lb) != 1:
        raise RuntimeError("EVP_DigestUpdate failed")
    if lc and EVP_DigestUpdate(ctx, c, lc) != 1:
        raise RuntimeError("EVP_DigestUpdate failed")
    cdef unsigned int n = 0
    if EVP_DigestFinal_ex(ctx, out, &n) != 1 or n != DIGEST:
        raise RuntimeError("EVP_DigestFinal_ex failed")
    return 0


def sha256(data):
    cdef const unsigned char[:] view = data
    cdef unsigned char out[DIGEST]
    cdef _Ctx holder = _Ctx()
    cdef const unsigned char *p = NULL
    if view.shape[0]:
        p = &view[0]
    _digest(holder.ctx, p, view.shape[0], NULL, 0, NULL, 0, out)
    return PyBytes_FromStringAndSize(<char *>out, DIGEST)


def hash_leaves(items, tag):
    """Digest each item as sha256(tag_byte || item); returns concatenated digests."""
    cdef unsigned char t = tag
    cdef Py_ssize_t n = len(items)
    cdef bytes result = PyBytes_FromStringAndSize(NULL, n * DIGEST)
    cdef char *outbuf
    cdef Py_ssize_t outlen
    PyBytes_AsStringAndSize(result, &outbuf, &outlen)
    cdef _Ctx holder = _Ctx()
    cdef const unsigned char[:] view
    cdef Py_ssize_t i
    cdef const unsigned char *p
    for i in range(n):
        view = items[i]
        p = &view[0] if view.shape[0] else NULL
        _digest(holder.ctx, &t, 1, p, view.shape[0], NULL, 0,
                <unsigned char *>outbuf + i * DIGEST)
    return result


def parent_level(level, tag):
    """One Merkle level up: pairs hashed as sha256(tag || left || right), odd tail promoted."""
    cdef const unsigned char[:] view = level
    if view.shape[0] % DIGEST:
        raise ValueError("level length is not a multiple of 32")
    cdef Py_ssize_t n = view.shape[0] // DIGEST
    if n < 2:
        return bytes(level)
    cdef unsigned char t = tag
    cdef Py_ssize_t pairs = n // 2
    cdef Py_ssize_t outn = pairs + (n & 1)
    cdef bytes result = PyBytes_FromStringAndSize(NULL, outn * DIGEST)
    cdef char *outbuf
    cdef Py_ssize_t outlen
    PyBytes_AsStringAndSize(result, &outbuf, &outlen)
    cdef _Ctx holder = _Ctx()
    cdef Py_ssize_t i
    for i in range(pairs):
        _digest(holder.ctx, &t, 1, &view[2 * i * DIGEST], 2 * DIGEST, NULL, 0,
                <unsigned char *>outbuf + i * DIGEST)
    if n & 1:
        memcpy(outbuf + pairs * DIGEST, &view[(n - 1) * DIGEST], DIGEST)
    return result


def root_from_level(level, tag):
    """Reduce a leaf level to its Merkle root. Level must be non-empty."""
    if not len(level):
        raise ValueError("cannot compute the root of an empty level")
    cdef object cur = level
    while len(cur) > DIGEST:
        cur = parent_level(cur, tag)
    return bytes(cur)


def fold_path(node, directions, siblings, tag):
    """Fold a leaf digest up an authentication path (see _kernel_py.fold_path)."""
    cdef const unsigned char[:] nview = node
    cdef const unsigned char[:] dview = directions
    cdef const unsigned char[:] sview = siblings
    if nview.shape[0] != DIGEST:
        raise ValueError("node must be a 32-byte digest")
    if sview.shape[0] != DIGEST * dview.shape[0]:
        raise ValueError("sibling bytes do not match direction count")
    cdef unsigned char t = tag
    cdef unsigned char acc[DIGEST]
    memcpy(acc, &nview[0], DIGEST)
    cdef _Ctx holder = _Ctx()
    cdef Py_ssize_t i
    cdef unsigned char d
    for i in range(dview.shape[0]):
        d = dview[i]
        if d == 0:
            _digest(holder.ctx, &t, 1, &sview[i * DIGEST], DIGEST, acc, DIGEST, acc)
        elif d == 1:
            _digest(holder.ctx, &t, 1, acc, DIGEST, &sview[i * DIGEST], DIGEST, acc)
        else:
            raise ValueError("direction flags must be 0 or 1")
    return PyBytes_FromStringAndSize(<char *>acc, DIGEST)

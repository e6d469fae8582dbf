#!/usr/bin/env python3
"""Search for supersingular curve parameters y^2 = x^3 + x over F_p.

Prints q (prime subgroup order, Solinas form), cofactor h, and p = h*q - 1
with p prime and p = 3 (mod 4), so that #E(F_p) = p + 1 = h*q.
"""
import sys
import gmpy2


def solinas_prime(bits):
    for a in range(bits - 2, 1, -1):
        for b in range(1, a):
            for s1 in (1, -1):
                for s2 in (1, -1):
                    q = (1 << (bits - 1)) + s1 * (1 << a) + s2 * (1 << b) + 1
                    if q.bit_length() == bits and gmpy2.is_prime(q, 50):
                        return q
    raise SystemExit("no solinas prime")


def main():
    qbits = int(sys.argv[1]) if len(sys.argv) > 1 else 256
    pbits = int(sys.argv[2]) if len(sys.argv) > 2 else 1536
    q = solinas_prime(qbits)
    hbits = pbits - qbits
    h = (1 << hbits) // 12 * 12
    while True:
        p = h * q - 1
        if p % 4 == 3 and gmpy2.is_prime(p, 50):
            break
        h += 12
    print("q =", hex(q))
    print("h =", hex(h))
    print("p =", hex(p))
    print("p bits", p.bit_length(), "q bits", q.bit_length())


if __name__ == "__main__":
    main()

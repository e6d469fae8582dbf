#include "zephyr/crypto/ibe.hpp"

#include "zephyr/crypto/hash.hpp"
#include "zephyr/error.hpp"

namespace zephyr::crypto {
namespace {

Bytes mask_for(const PairingContext& ctx, const GtElement& g, std::size_t len) {
    const Bytes enc = ctx.encode_gt(g);
    const auto h = hash256(kH2Tag, {ByteView(enc)});
    return Bytes(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(len));
}

}  // namespace

std::string fold_identity(std::string_view identity) {
    if (identity.empty()) throw Error(Errc::InvalidIdentity, "identity must be nonempty");
    std::string out(identity);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

G1Point hash_identity(const PairingContext& ctx, std::string_view folded_identity) {
    return ctx.hash_to_g1(kH1Tag, as_bytes(folded_identity));
}

MasterKeyPair ibe_setup(Rng& rng, CurvePreset preset) {
    const auto& ctx = PairingContext::get(preset);
    MasterKeyPair kp;
    kp.msk = ctx.random_scalar(rng);
    kp.mpk.preset = preset;
    kp.mpk.p_pub = ctx.mul(ctx.generator(), kp.msk);
    return kp;
}

IdentityPrivateKey ibe_extract(const MasterKeyPair& master, std::string_view identity) {
    const auto& ctx = master.mpk.context();
    IdentityPrivateKey key;
    key.preset = master.mpk.preset;
    key.identity = fold_identity(identity);
    key.d_id = ctx.mul(hash_identity(ctx, key.identity), master.msk);
    return key;
}

bool ibe_verify_key(const MasterPublicKey& mpk, const IdentityPrivateKey& key) {
    if (key.preset != mpk.preset) return false;
    const auto& ctx = mpk.context();
    return ctx.pair(key.d_id, ctx.generator()) == ctx.pair(hash_identity(ctx, key.identity), mpk.p_pub);
}

IbeCiphertext ibe_encrypt(const MasterPublicKey& mpk, std::string_view identity, ByteView plaintext, Rng& rng) {
    if (plaintext.size() > kIbeMaxPlaintext)
        throw Error(Errc::PayloadTooLong, "IBE plaintext exceeds " + std::to_string(kIbeMaxPlaintext) + " bytes");
    return ibe_encrypt(ibe_precompute(mpk, identity), plaintext, rng);
}

IbeRecipient ibe_precompute(const MasterPublicKey& mpk, std::string_view identity) {
    const auto& ctx = mpk.context();
    IbeRecipient r;
    r.mpk = mpk;
    r.identity = fold_identity(identity);
    r.g_id = ctx.pair(hash_identity(ctx, r.identity), mpk.p_pub);
    return r;
}

IbeCiphertext ibe_encrypt(const IbeRecipient& recipient, ByteView plaintext, Rng& rng) {
    if (plaintext.size() > kIbeMaxPlaintext)
        throw Error(Errc::PayloadTooLong, "IBE plaintext exceeds " + std::to_string(kIbeMaxPlaintext) + " bytes");
    const auto& ctx = recipient.mpk.context();
    const mpz_class r = ctx.random_scalar(rng);
    IbeCiphertext c;
    c.u = ctx.mul(ctx.generator(), r);
    const GtElement g = ctx.gt_pow(recipient.g_id, r);
    c.v = mask_for(ctx, g, plaintext.size());
    for (std::size_t i = 0; i < plaintext.size(); ++i) c.v[i] ^= plaintext[i];
    return c;
}

Bytes ibe_decrypt(const IdentityPrivateKey& key, const IbeCiphertext& c) {
    if (c.v.size() > kIbeMaxPlaintext) throw Error(Errc::PayloadTooLong, "IBE ciphertext payload too long");
    const auto& ctx = PairingContext::get(key.preset);
    Bytes out = mask_for(ctx, ctx.pair(key.d_id, c.u), c.v.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] ^= c.v[i];
    return out;
}

}  // namespace zephyr::crypto

#include "pseudochain/crypto/engine.hpp"

#include "pseudochain/common/error.hpp"

namespace pseudochain {

std::string_view to_string(CryptoOpKind kind) {
  switch (kind) {
    case CryptoOpKind::kEncrypt: return "Encrypt";
    case CryptoOpKind::kDecrypt: return "Decrypt";
    case CryptoOpKind::kSign: return "Sign";
    case CryptoOpKind::kVerifySig: return "VerifySig";
    case CryptoOpKind::kVerifyCert: return "VerifyCert";
  }
  return "?";
}

double CryptoTimingModel::cost(CryptoOpKind kind) const {
  switch (kind) {
    case CryptoOpKind::kEncrypt: return encrypt_ms;
    case CryptoOpKind::kDecrypt: return decrypt_ms;
    case CryptoOpKind::kSign: return sign_ms;
    case CryptoOpKind::kVerifySig: return verify_sig_ms;
    case CryptoOpKind::kVerifyCert: return verify_cert_ms;
  }
  return 0.0;
}

void CryptoTimingModel::validate() const {
  for (double v : {encrypt_ms, decrypt_ms, sign_ms, verify_sig_ms,
                   verify_cert_ms}) {
    if (!(v >= 0.0)) {
      throw Error(ErrorCode::kConfigError, "crypto timing entries must be >= 0");
    }
  }
}

CryptoEngine::CryptoEngine(std::unique_ptr<CryptoProvider> provider,
                           CryptoTimingModel timing)
    : provider_(std::move(provider)), timing_(timing) {
  timing_.validate();
}

double CryptoEngine::charge(CryptoOpKind kind) {
  const double cost = timing_.cost(kind);
  ++meter_.counts[static_cast<std::size_t>(kind)];
  meter_.total_ms += cost;
  return cost;
}

Timed<Bytes> CryptoEngine::encrypt(std::span<const std::uint8_t> public_key,
                                   std::span<const std::uint8_t> plaintext) {
  Bytes out = provider_->encrypt(public_key, plaintext);
  return {std::move(out), charge(CryptoOpKind::kEncrypt)};
}

Timed<std::optional<Bytes>> CryptoEngine::decrypt(
    std::span<const std::uint8_t> private_key,
    std::span<const std::uint8_t> ciphertext) {
  auto out = provider_->decrypt(private_key, ciphertext);
  return {std::move(out), charge(CryptoOpKind::kDecrypt)};
}

Timed<Bytes> CryptoEngine::sign(std::span<const std::uint8_t> private_key,
                                std::span<const std::uint8_t> message) {
  Bytes out = provider_->sign(private_key, message);
  return {std::move(out), charge(CryptoOpKind::kSign)};
}

Timed<bool> CryptoEngine::verify_signature(
    std::span<const std::uint8_t> public_key,
    std::span<const std::uint8_t> message,
    std::span<const std::uint8_t> signature) {
  bool ok = provider_->verify(public_key, message, signature);
  return {ok, charge(CryptoOpKind::kVerifySig)};
}

Timed<bool> CryptoEngine::verify_certificate(
    const Certificate& certificate, std::span<const std::uint8_t> issuer_key) {
  bool ok = provider_->verify(issuer_key, certificate.signed_payload(),
                              certificate.issuer_signature);
  return {ok, charge(CryptoOpKind::kVerifyCert)};
}

CryptoOpResult CryptoEngine::crypto_op(CryptoOpKind kind,
                                       const CryptoOpInputs& in) {
  CryptoOpResult result;
  switch (kind) {
    case CryptoOpKind::kEncrypt: {
      auto r = encrypt(in.key, in.message);
      result.data = std::move(r.value);
      result.ok = true;
      result.elapsed_ms = r.elapsed_ms;
      break;
    }
    case CryptoOpKind::kDecrypt: {
      auto r = decrypt(in.key, in.message);
      result.ok = r.value.has_value();
      if (r.value) result.data = std::move(*r.value);
      result.elapsed_ms = r.elapsed_ms;
      break;
    }
    case CryptoOpKind::kSign: {
      auto r = sign(in.key, in.message);
      result.data = std::move(r.value);
      result.ok = true;
      result.elapsed_ms = r.elapsed_ms;
      break;
    }
    case CryptoOpKind::kVerifySig: {
      auto r = verify_signature(in.key, in.message, in.signature);
      result.ok = r.value;
      result.elapsed_ms = r.elapsed_ms;
      break;
    }
    case CryptoOpKind::kVerifyCert: {
      if (!in.certificate) {
        throw Error(ErrorCode::kInvalidArgument,
                    "VerifyCert requires a certificate");
      }
      auto r = verify_certificate(*in.certificate, in.key);
      result.ok = r.value;
      result.elapsed_ms = r.elapsed_ms;
      break;
    }
  }
  return result;
}

}  // namespace pseudochain

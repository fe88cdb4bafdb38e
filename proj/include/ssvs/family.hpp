#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace ssvs {

enum class FamilyKind { poisson, negative_binomial, bernoulli, gaussian };
enum class Link { log, logit, identity };

// Response distribution plus link. `dispersion` is the negative-binomial size
// (Var = mu + mu^2 / size) or the gaussian residual variance; it is present
// exactly when the kind needs one.
struct Family {
  FamilyKind kind = FamilyKind::poisson;
  Link link = Link::log;
  std::optional<double> dispersion;

  static Family canonical(FamilyKind kind);

  bool needs_dispersion() const {
    return kind == FamilyKind::negative_binomial || kind == FamilyKind::gaussian;
  }
  bool is_count() const { return kind != FamilyKind::gaussian; }

  // Throws ConfigError for unsupported kind/link pairs or a dispersion that is
  // missing, superfluous or nonpositive.
  void validate() const;
};

Link canonical_link(FamilyKind kind);

std::string_view to_string(FamilyKind kind);
std::string_view to_string(Link link);
FamilyKind parse_family_kind(std::string_view name);
Link parse_link(std::string_view name);

}  // namespace ssvs

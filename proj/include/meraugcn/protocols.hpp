#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "meraugcn/manifest.hpp"

namespace meraugcn {

/// Record indices into a manifest.
struct Fold {
  std::string name;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

enum class Protocol { none, hde, loso };

Protocol parse_protocol(std::string_view name);
std::string_view to_string(Protocol protocol);

/// Holdout-database: exactly two databases A < B (by tag); fold 1 trains on
/// A and tests on B, fold 2 the reverse.
std::vector<Fold> hde_protocol(const Manifest& manifest);

/// Leave-one-subject-out, one fold per subject in order of first appearance.
std::vector<Fold> loso_protocol(const Manifest& manifest);

/// Single fold that trains and tests on every record.
Fold all_records_fold(const Manifest& manifest);

std::vector<Fold> make_folds(const Manifest& manifest, Protocol protocol);

}  // namespace meraugcn

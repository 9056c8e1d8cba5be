#include "meraugcn/protocols.hpp"

#include <map>

#include "meraugcn/errors.hpp"

namespace meraugcn {

Protocol parse_protocol(std::string_view name) {
  if (name == "none") return Protocol::none;
  if (name == "hde") return Protocol::hde;
  if (name == "loso") return Protocol::loso;
  throw ValidationError("unknown protocol '" + std::string(name) + "' (expected none|hde|loso)");
}

std::string_view to_string(Protocol protocol) {
  switch (protocol) {
    case Protocol::none: return "none";
    case Protocol::hde: return "hde";
    case Protocol::loso: return "loso";
  }
  return "?";
}

std::vector<Fold> hde_protocol(const Manifest& manifest) {
  std::map<std::string, std::vector<std::size_t>> by_db;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    by_db[std::string(to_string(manifest.records[i].database))].push_back(i);
  }
  if (by_db.size() != 2) {
    throw ProtocolError("hde: needs exactly two databases, manifest has " + std::to_string(by_db.size()));
  }
  const auto& [a, a_idx] = *by_db.begin();
  const auto& [b, b_idx] = *std::next(by_db.begin());
  return {Fold{a + "_to_" + b, a_idx, b_idx}, Fold{b + "_to_" + a, b_idx, a_idx}};
}

std::vector<Fold> loso_protocol(const Manifest& manifest) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& s = manifest.records[i].subject_id;
    if (!by_subject.contains(s)) order.push_back(s);
    by_subject[s].push_back(i);
  }
  if (order.size() < 2) throw ProtocolError("loso: needs at least two subjects");
  std::vector<Fold> folds;
  for (const auto& subject : order) {
    Fold f;
    f.name = "loso_" + subject;
    f.test = by_subject[subject];
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
      if (manifest.records[i].subject_id != subject) f.train.push_back(i);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

Fold all_records_fold(const Manifest& manifest) {
  Fold f;
  f.name = "all";
  for (std::size_t i = 0; i < manifest.records.size(); ++i) f.train.push_back(i);
  f.test = f.train;
  return f;
}

std::vector<Fold> make_folds(const Manifest& manifest, Protocol protocol) {
  switch (protocol) {
    case Protocol::none: return {all_records_fold(manifest)};
    case Protocol::hde: return hde_protocol(manifest);
    case Protocol::loso: return loso_protocol(manifest);
  }
  throw ValidationError("unknown protocol");
}

}  // namespace meraugcn

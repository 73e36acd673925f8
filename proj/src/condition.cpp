#include "conjure/condition.hpp"

#include <set>
#include <stdexcept>

namespace conjure {

Vocabulary::Vocabulary(std::vector<ConditionId> entries) : entries_(std::move(entries)) {
  std::set<int> ids;
  std::set<std::string> labels;
  for (const auto& c : entries_) {
    if (c.id == kNullConditionId) throw std::invalid_argument("condition id 0 is reserved");
    if (c.display.empty()) throw std::invalid_argument("condition label must be non-empty");
    if (!ids.insert(c.id).second)
      throw std::invalid_argument("duplicate condition id " + std::to_string(c.id));
    if (!labels.insert(c.display).second)
      throw std::invalid_argument("duplicate condition label '" + c.display + "'");
  }
}

Vocabulary Vocabulary::from_labels(const std::vector<std::string>& labels) {
  std::vector<ConditionId> entries;
  entries.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    entries.push_back({static_cast<int>(i + 1), labels[i]});
  return Vocabulary(std::move(entries));
}

const ConditionId& Vocabulary::by_label(std::string_view label) const {
  for (const auto& c : entries_)
    if (c.display == label) return c;
  throw std::invalid_argument("unknown label '" + std::string(label) + "'");
}

const ConditionId& Vocabulary::by_id(int id) const {
  if (auto i = index_of(id)) return entries_[*i];
  throw std::invalid_argument("unknown condition id " + std::to_string(id));
}

std::optional<std::size_t> Vocabulary::index_of(int id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].id == id) return i;
  return std::nullopt;
}

}  // namespace conjure

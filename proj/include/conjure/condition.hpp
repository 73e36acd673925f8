#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace conjure {

// A prompt in a finite vocabulary. id 0 is reserved for the null
// (unconditional) prompt used by classifier-free guidance.
struct ConditionId {
  int id = 0;
  std::string display;

  friend bool operator==(const ConditionId& a, const ConditionId& b) { return a.id == b.id; }
};

inline constexpr int kNullConditionId = 0;

inline ConditionId null_condition() { return {kNullConditionId, "<null>"}; }

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<ConditionId> entries);

  // Builds ids 1..n in label order.
  static Vocabulary from_labels(const std::vector<std::string>& labels);

  std::size_t size() const { return entries_.size(); }
  const std::vector<ConditionId>& entries() const { return entries_; }
  const ConditionId& operator[](std::size_t i) const { return entries_[i]; }

  const ConditionId& by_label(std::string_view label) const;
  const ConditionId& by_id(int id) const;
  std::optional<std::size_t> index_of(int id) const;
  bool contains(int id) const { return index_of(id).has_value(); }

 private:
  std::vector<ConditionId> entries_;
};

}  // namespace conjure

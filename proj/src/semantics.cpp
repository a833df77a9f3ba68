// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#include "tagmoe/semantics.hpp"

#include <algorithm>
#include <cmath>

#include "tagmoe/binary_io.hpp"
#include "tagmoe/errors.hpp"
#include "tagmoe/ops.hpp"

namespace tagmoe {

namespace {

constexpr std::string_view kBuiltinVocabulary =
    "scope:local-edit\n"
    "scope:global-edit\n"
    "type:geometry-edit\n"
    "type:attribute-edit\n"
    "type:style-edit\n"
    "preserve:structure\n"
    "preserve:background\n";

constexpr std::string_view kBuiltinRules =
    "shift-local -> scope:local-edit, type:geometry-edit, preserve:structure, preserve:background\n"
    "unshift-local -> scope:local-edit, type:geometry-edit, preserve:structure, preserve:background\n"
    "recolor-local -> scope:local-edit, type:attribute-edit, preserve:structure\n"
    "global-rotate -> scope:global-edit, type:geometry-edit\n"
    "global-scale -> scope:global-edit, type:geometry-edit\n"
    "global-restyle -> scope:global-edit, type:style-edit\n"
    "restyle-grid -> scope:global-edit, type:style-edit\n";

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = trim(text.substr(0, nl));
    ++line_no;
    if (!line.empty() && line.front() != '#') f(line, line_no);
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

}  // namespace

std::string_view builtin_vocabulary_text() { return kBuiltinVocabulary; }
std::string_view builtin_rules_text() { return kBuiltinRules; }

std::string_view tier_prefix(TagTier tier) {
  switch (tier) {
    case TagTier::kScope: return "scope";
    case TagTier::kType: return "type";
    case TagTier::kPreservation: return "preserve";
  }
  return "?";
}

TagTier parse_tier(std::string_view text) {
  if (text == "scope") return TagTier::kScope;
  if (text == "type") return TagTier::kType;
  if (text == "preserve") return TagTier::kPreservation;
  throw VocabularyError("unknown tag tier '" + std::string(text) + "'");
}

TagVocabulary::TagVocabulary(std::vector<Tag> tags) : tags_(std::move(tags)) {
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    if (tags_[i].id != i) throw VocabularyError("tag ids must be dense and ordered");
    if (tags_[i].name.empty()) throw VocabularyError("empty tag name");
    if (!index_.emplace(qualified_name(i), i).second) {
      throw VocabularyError("duplicate tag '" + qualified_name(i) + "'");
    }
  }
  // Names are unique across tiers as well, not only per tier.
  for (std::size_t i = 0; i < tags_.size(); ++i) {
    for (std::size_t j = i + 1; j < tags_.size(); ++j) {
      if (tags_[i].name == tags_[j].name) throw VocabularyError("duplicate tag name '" + tags_[i].name + "'");
    }
  }
}

TagVocabulary TagVocabulary::parse(std::string_view text) {
  std::vector<Tag> tags;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw VocabularyError("line " + std::to_string(line_no) + ": expected tier:name, got '" +
                            std::string(line) + "'");
    }
    tags.push_back({std::string(trim(line.substr(colon + 1))), parse_tier(trim(line.substr(0, colon))),
                    tags.size()});
  });
  return TagVocabulary(std::move(tags));
}

TagVocabulary TagVocabulary::load(const std::filesystem::path& path) {
  return parse(io::read_file(path.string()));
}

TagVocabulary TagVocabulary::builtin() { return parse(kBuiltinVocabulary); }

const Tag& TagVocabulary::tag(std::size_t id) const {
  if (id >= tags_.size()) throw VocabularyError("tag id " + std::to_string(id) + " not in vocabulary");
  return tags_[id];
}

std::size_t TagVocabulary::id_of(std::string_view qualified) const {
  const auto it = index_.find(qualified);
  if (it == index_.end()) throw VocabularyError("unknown tag '" + std::string(qualified) + "'");
  return it->second;
}

std::string TagVocabulary::qualified_name(std::size_t id) const {
  const auto& t = tag(id);
  return std::string(tier_prefix(t.tier)) + ":" + t.name;
}

std::string TagVocabulary::to_text() const {
  std::string out;
  for (std::size_t i = 0; i < tags_.size(); ++i) out += qualified_name(i) + "\n";
  return out;
}

TagSet::TagSet(std::vector<std::size_t> ids) : ids_(std::move(ids)) {
  if (ids_.empty()) throw ContractError("tag set must not be empty");
  std::sort(ids_.begin(), ids_.end());
  if (std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end()) {
    throw ContractError("tag set contains duplicate ids");
  }
}

bool TagSet::contains(std::size_t id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

std::size_t TagSet::overlap(const TagSet& other) const {
  std::size_t n = 0;
  for (const auto id : ids_) n += other.contains(id) ? 1 : 0;
  return n;
}

void TagSet::validate(const TagVocabulary& vocab) const {
  if (ids_.empty()) throw ContractError("tag set must not be empty");
  bool has_scope = false;
  for (const auto id : ids_) {
    if (vocab.tag(id).tier == TagTier::kScope) has_scope = true;
  }
  if (!has_scope) throw ContractError("tag set has no scope-tier tag");
}

TagRules TagRules::parse(std::string_view text, const TagVocabulary& vocab) {
  TagRules rules;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto arrow = line.find("->");
    if (arrow == std::string_view::npos) {
      throw RegistryError("rule line " + std::to_string(line_no) + ": expected 'task -> tags'");
    }
    std::string task(trim(line.substr(0, arrow)));
    if (task.empty()) throw RegistryError("rule line " + std::to_string(line_no) + ": empty task id");
    std::vector<std::size_t> ids;
    auto rest = line.substr(arrow + 2);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = trim(rest.substr(0, comma));
      if (!item.empty()) ids.push_back(vocab.id_of(item));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    TagSet set(std::move(ids));
    set.validate(vocab);
    if (!rules.table_.emplace(task, std::move(set)).second) {
      throw RegistryError("duplicate rule for task '" + task + "'");
    }
    rules.order_.push_back(std::move(task));
  });
  return rules;
}

TagRules TagRules::load(const std::filesystem::path& path, const TagVocabulary& vocab) {
  return parse(io::read_file(path.string()), vocab);
}

TagRules TagRules::builtin(const TagVocabulary& vocab) { return parse(kBuiltinRules, vocab); }

const TagSet& TagRules::lookup(std::string_view task_id) const {
  const auto it = table_.find(task_id);
  if (it == table_.end()) throw RegistryError("unknown task '" + std::string(task_id) + "'");
  return it->second;
}

bool TagRules::contains(std::string_view task_id) const { return table_.find(task_id) != table_.end(); }

TagSet annotate_synthetic(std::string_view task_id, const TagRules& rules) { return rules.lookup(task_id); }

TagEmbedding::TagEmbedding(std::size_t tags, std::size_t dim, Rng& rng, bool trainable_flag)
    : weight(normal_parameter({tags, dim}, rng, 1.0 / std::sqrt(static_cast<double>(dim)))),
      trainable(trainable_flag) {
  weight.set_requires_grad(trainable);
}

void TagEmbedding::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
}

PredictionHead::PredictionHead(std::size_t experts, std::size_t hidden, std::size_t dim, Rng& rng)
    : mlp(experts, hidden, dim, rng) {}

void PredictionHead::collect(const std::string& prefix, ParameterList& out) const { mlp.collect(prefix, out); }

Tensor semantic_embedding(const TagSet& tags, const TagEmbedding& embedding) {
  if (tags.size() == 0) throw ContractError("semantic_embedding: empty tag set");
  const std::size_t k = embedding.weight.dim(0);
  for (const auto id : tags.ids()) {
    if (id >= k) throw VocabularyError("tag id " + std::to_string(id) + " outside embedding of " + std::to_string(k));
  }
  // gather + column sum adds the rows one at a time in ascending id order.
  Tensor s = sum(gather_rows(embedding.weight, tags.ids()), 0);
  return embedding.trainable ? s : s.detach();
}

Tensor predict_semantics(const Tensor& signature, const PredictionHead& head) {
  if (signature.rank() != 1 || signature.dim(0) != head.experts()) {
    throw ConfigError("prediction head expects a signature of " + std::to_string(head.experts()) +
                      " experts, got " + shape_string(signature.shape()));
  }
#ifndef NDEBUG
  double total = 0.0;
  for (const double v : signature.data()) {
    if (v < 0.0) throw ContractError("routing signature has a negative component");
    total += v;
  }
  if (total > 1.0 + 1e-9) throw ContractError("routing signature sums above 1");
#endif
  return head.mlp.forward(signature);
}

Tensor alignment_loss(const Tensor& predicted, const Tensor& target, bool stop_target_gradient) {
  const Tensor t = stop_target_gradient ? target.detach() : target;
  return sub(Tensor::scalar(1.0), cosine_similarity(predicted, t));
}

}  // namespace tagmoe

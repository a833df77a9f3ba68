// Copyright 2026 The tagmoe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tagmoe/nn.hpp"

namespace tagmoe {

enum class TagTier { kScope, kType, kPreservation };

/// "scope", "type" or "preserve".
std::string_view tier_prefix(TagTier tier);
TagTier parse_tier(std::string_view text);

struct Tag {
  std::string name;
  TagTier tier;
  std::size_t id;
};

/// Ordered set of atomic task tags. Text form: one `tier:name` per line, ids
/// in line order; blank lines and lines starting with '#' are skipped.
class TagVocabulary {
 public:
  TagVocabulary() = default;
  explicit TagVocabulary(std::vector<Tag> tags);

  static TagVocabulary parse(std::string_view text);
  static TagVocabulary load(const std::filesystem::path& path);
  /// The vocabulary shipped with the repository (data/vocab.txt).
  static TagVocabulary builtin();

  [[nodiscard]] std::size_t size() const { return tags_.size(); }
  [[nodiscard]] const Tag& tag(std::size_t id) const;
  [[nodiscard]] const std::vector<Tag>& tags() const { return tags_; }
  /// Id of `tier:name`; VocabularyError when absent.
  [[nodiscard]] std::size_t id_of(std::string_view qualified) const;
  [[nodiscard]] std::string qualified_name(std::size_t id) const;
  [[nodiscard]] std::string to_text() const;

 private:
  std::vector<Tag> tags_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Tags of one sample, kept sorted by ascending id.
class TagSet {
 public:
  TagSet() = default;
  /// Any order; empty input or duplicate ids raise ContractError.
  explicit TagSet(std::vector<std::size_t> ids);

  [[nodiscard]] const std::vector<std::size_t>& ids() const { return ids_; }
  [[nodiscard]] std::size_t size() const { return ids_.size(); }
  [[nodiscard]] bool contains(std::size_t id) const;
  [[nodiscard]] std::size_t overlap(const TagSet& other) const;
  /// Ids in range and at least one scope-tier tag.
  void validate(const TagVocabulary& vocab) const;

  friend bool operator==(const TagSet&, const TagSet&) = default;

 private:
  std::vector<std::size_t> ids_;
};

/// Task-id -> tag set table. Text form: `task-id -> tier:name, tier:name, ...`.
class TagRules {
 public:
  TagRules() = default;

  static TagRules parse(std::string_view text, const TagVocabulary& vocab);
  static TagRules load(const std::filesystem::path& path, const TagVocabulary& vocab);
  /// The rule table shipped with the repository (data/task_rules.txt).
  static TagRules builtin(const TagVocabulary& vocab);

  [[nodiscard]] const TagSet& lookup(std::string_view task_id) const;
  [[nodiscard]] bool contains(std::string_view task_id) const;
  [[nodiscard]] const std::vector<std::string>& task_ids() const { return order_; }

 private:
  std::map<std::string, TagSet, std::less<>> table_;
  std::vector<std::string> order_;
};

std::string_view builtin_vocabulary_text();
std::string_view builtin_rules_text();

/// Deterministic tag annotation of a synthetic task (RegistryError when the
/// task is unknown).
TagSet annotate_synthetic(std::string_view task_id, const TagRules& rules);

/// W_tag [K x D]. Rows are drawn from Normal(0, 1/sqrt(D)). When not
/// trainable the matrix never requires grad and stays bit-identical.
class TagEmbedding {
 public:
  TagEmbedding() = default;
  TagEmbedding(std::size_t tags, std::size_t dim, Rng& rng, bool trainable);

  void collect(const std::string& prefix, ParameterList& out) const;

  Tensor weight;
  bool trainable = false;
};

/// H_pred: N -> 4N -> D.
class PredictionHead {
 public:
  PredictionHead() = default;
  PredictionHead(std::size_t experts, std::size_t hidden, std::size_t dim, Rng& rng);

  void collect(const std::string& prefix, ParameterList& out) const;
  [[nodiscard]] std::size_t experts() const { return mlp.in_features(); }

  Mlp mlp;
};

/// s = sum_{t in tags} W_tag[t], summed in ascending id order. Detached from
/// the graph unless the embedding is trainable.
Tensor semantic_embedding(const TagSet& tags, const TagEmbedding& embedding);

/// s_hat = H_pred(g).
Tensor predict_semantics(const Tensor& signature, const PredictionHead& head);

/// 1 - cos(s_hat, s). With `stop_target_gradient` the target branch is cut.
Tensor alignment_loss(const Tensor& predicted, const Tensor& target, bool stop_target_gradient = true);

}  // namespace tagmoe

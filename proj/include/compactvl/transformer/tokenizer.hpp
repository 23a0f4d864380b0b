// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cvl::transformer {

/// Token <-> id table. The five special tokens always exist.
class Vocabulary {
 public:
  static constexpr const char* kPad = "[PAD]";
  static constexpr const char* kUnk = "[UNK]";
  static constexpr const char* kCls = "[CLS]";
  static constexpr const char* kSep = "[SEP]";
  static constexpr const char* kMask = "[MASK]";

  /// Specials first ([PAD] = 0), then `tokens` in order, skipping duplicates.
  explicit Vocabulary(const std::vector<std::string>& tokens = {});

  /// One token per line, ids by line number; missing specials are appended.
  static Vocabulary from_file(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Word-level vocabulary of every basic token in `texts`, sorted, so the
  /// ids do not depend on text order.
  static Vocabulary from_texts(const std::vector<std::string>& texts);

  int size() const { return static_cast<int>(tokens_.size()); }
  bool contains(std::string_view token) const;
  int id(std::string_view token) const;  // [UNK] when absent
  const std::string& token(int id) const;

  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }
  int mask_id() const { return mask_; }
  bool is_special(int id) const;

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int pad_ = 0, unk_ = 1, cls_ = 2, sep_ = 3, mask_ = 4;
};

/// Lower-cases and splits on whitespace and punctuation (each punctuation
/// character becomes its own token).
std::vector<std::string> basic_tokenize(std::string_view text);

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<int> encode(std::string_view text) const = 0;
  /// Joins tokens with spaces, gluing "##" continuations and dropping specials.
  virtual std::string decode(const std::vector<int>& ids) const;
  virtual const Vocabulary& vocabulary() const = 0;
};

/// Greedy longest-match-first subword tokenizer with "##" continuations.
class WordPieceTokenizer : public Tokenizer {
 public:
  explicit WordPieceTokenizer(Vocabulary vocab, int max_chars_per_word = 100);
  std::vector<int> encode(std::string_view text) const override;
  const Vocabulary& vocabulary() const override { return vocab_; }

 private:
  Vocabulary vocab_;
  int max_chars_;
};

/// Maps each basic token to its id or [UNK].
class WhitespaceTokenizer : public Tokenizer {
 public:
  explicit WhitespaceTokenizer(Vocabulary vocab) : vocab_(std::move(vocab)) {}
  std::vector<int> encode(std::string_view text) const override;
  const Vocabulary& vocabulary() const override { return vocab_; }

 private:
  Vocabulary vocab_;
};

}  // namespace cvl::transformer

// Copyright 2026 The compactvl Authors
// SPDX-License-Identifier: Apache-2.0

#include "compactvl/transformer/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>

namespace cvl::transformer {

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  for (const char* s : {kPad, kUnk, kCls, kSep, kMask}) add(s);
  for (const auto& t : tokens) add(t);
}

void Vocabulary::add(const std::string& token) {
  if (ids_.count(token)) return;
  ids_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary " + path.string());
  Vocabulary v;
  v.tokens_.clear();
  v.ids_.clear();
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    v.add(line);
  }
  for (const char* s : {kPad, kUnk, kCls, kSep, kMask}) v.add(s);
  v.pad_ = v.ids_.at(kPad);
  v.unk_ = v.ids_.at(kUnk);
  v.cls_ = v.ids_.at(kCls);
  v.sep_ = v.ids_.at(kSep);
  v.mask_ = v.ids_.at(kMask);
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::from_texts(const std::vector<std::string>& texts) {
  std::set<std::string> words;
  for (const auto& t : texts)
    for (auto& w : basic_tokenize(t)) words.insert(std::move(w));
  return Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

bool Vocabulary::contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }

int Vocabulary::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? unk_ : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("token id " + std::to_string(id) + " outside the vocabulary");
  return tokens_[id];
}

bool Vocabulary::is_special(int id) const {
  return id == pad_ || id == unk_ || id == cls_ || id == sep_ || id == mask_;
}

std::vector<std::string> basic_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  const auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  const auto& v = vocabulary();
  std::string out;
  for (int id : ids) {
    if (v.is_special(id) && id != v.unk_id()) continue;
    const std::string& t = v.token(id);
    if (t.rfind("##", 0) == 0 && !out.empty()) {
      out += t.substr(2);
    } else {
      if (!out.empty()) out += ' ';
      out += t;
    }
  }
  return out;
}

WordPieceTokenizer::WordPieceTokenizer(Vocabulary vocab, int max_chars_per_word)
    : vocab_(std::move(vocab)), max_chars_(max_chars_per_word) {}

std::vector<int> WordPieceTokenizer::encode(std::string_view text) const {
  std::vector<int> out;
  for (const auto& word : basic_tokenize(text)) {
    if (static_cast<int>(word.size()) > max_chars_) {
      out.push_back(vocab_.unk_id());
      continue;
    }
    std::vector<int> pieces;
    size_t start = 0;
    bool bad = false;
    while (start < word.size()) {
      size_t end = word.size();
      int found = -1;
      while (start < end) {
        std::string sub = word.substr(start, end - start);
        if (start > 0) sub = "##" + sub;
        if (vocab_.contains(sub)) {
          found = vocab_.id(sub);
          break;
        }
        --end;
      }
      if (found < 0) {
        bad = true;
        break;
      }
      pieces.push_back(found);
      start = end;
    }
    if (bad) out.push_back(vocab_.unk_id());
    else out.insert(out.end(), pieces.begin(), pieces.end());
  }
  return out;
}

std::vector<int> WhitespaceTokenizer::encode(std::string_view text) const {
  std::vector<int> out;
  for (const auto& w : basic_tokenize(text)) out.push_back(vocab_.id(w));
  return out;
}

}  // namespace cvl::transformer

// Copyright 2026 The Cartomap Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vectorize.hpp"

namespace cartomap {

namespace {

constexpr const char* kEnglish[] = {
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but", "by",
    "can", "could", "did", "do", "does", "doing", "down", "during", "each", "either", "et", "al",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "however", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "may", "me", "might", "more", "most", "must", "my", "myself", "no", "nor", "not",
    "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over",
    "own", "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs",
    "them", "themselves", "then", "there", "these", "they", "this", "those", "through", "thus", "to",
    "too", "under", "until", "up", "upon", "us", "very", "via", "was", "we", "were", "what", "when",
    "where", "whether", "which", "while", "who", "whom", "why", "will", "with", "within", "without",
    "would", "you", "your", "yours", "yourself", "yourselves", "s", "t", "paper", "using", "based",
    "show", "shown", "propose", "proposed", "present", "presented", "results", "new", "one", "two",
};

constexpr const char* kFrench[] = {
    "a", "à", "ai", "aie", "ainsi", "alors", "au", "aucun", "aussi", "autre", "aux", "avec", "avoir",
    "c", "ça", "ce", "ceci", "cela", "celle", "celles", "celui", "ces", "cet", "cette", "ceux", "chaque",
    "chez", "comme", "comment", "d", "dans", "de", "des", "du", "donc", "dont", "elle", "elles", "en",
    "encore", "entre", "est", "et", "été", "être", "eu", "fait", "faire", "il", "ils", "j", "je", "l",
    "la", "le", "les", "leur", "leurs", "lui", "m", "ma", "mais", "me", "même", "mes", "moi", "mon",
    "n", "ne", "ni", "nos", "notre", "nous", "on", "ont", "ou", "où", "par", "pas", "peu", "peut",
    "plus", "pour", "qu", "quand", "que", "quel", "quelle", "quels", "qui", "s", "sa", "sans", "se",
    "ses", "si", "son", "sont", "sous", "sur", "ta", "te", "tes", "toi", "ton", "tous", "tout", "toute",
    "toutes", "très", "tu", "un", "une", "vos", "votre", "vous", "y",
};

StopwordSet make(std::initializer_list<std::span<const char* const>> lists) {
  StopwordSet s;
  for (auto list : lists) {
    for (const char* w : list) s.emplace(w);
  }
  return s;
}

}  // namespace

const StopwordSet& stopwords(std::string_view language) {
  static const StopwordSet en = make({kEnglish});
  static const StopwordSet fr = make({kFrench});
  static const StopwordSet both = make({kEnglish, kFrench});
  static const StopwordSet none;
  if (language == "en") return en;
  if (language == "fr") return fr;
  if (language == "en+fr") return both;
  if (language == "none") return none;
  fail(ErrorCode::InvalidArgument, "unknown stopword language '" + std::string(language) + "'");
}

}  // namespace cartomap

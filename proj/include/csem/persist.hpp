#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "csem/charlm.hpp"
#include "csem/classifier.hpp"
#include "csem/corpus.hpp"
#include "csem/embed.hpp"
#include "csem/tagger.hpp"

namespace csem::persist {

// Model files share one layout: magic "CSEM", format version (u32 LE), a
// one-byte kind tag, the kind's payload, and a trailing CRC-32 of all
// preceding bytes. Strings are u32-length-prefixed UTF-8; tensors are
// (u32 rank, u32 dims..., row-major f32 values), everything little-endian.
inline constexpr std::uint32_t kVersion = 1;

enum class Kind : std::uint8_t {
  dict = 1,
  charlm = 2,
  tagger = 3,
  classifier = 4,
  static_table = 5,
};

void save(const CharDictionary& dict, const std::string& path);
void save(const CharLM& model, const std::string& path);
void save(const CrfTagger& tagger, const std::string& path);
void save(const GruClassifier& model, const std::string& path);
void save(const StaticWordTable& table, const std::string& path);

CharDictionary load_dict(const std::string& path);
CharLM load_charlm(const std::string& path);
// Heads are stored without their embedder; supply one with a matching
// dimension when loading.
CrfTagger load_tagger(const std::string& path,
                      std::shared_ptr<const Embedder> embedder);
GruClassifier load_classifier(const std::string& path,
                              std::shared_ptr<const Embedder> embedder);
StaticWordTable load_table(const std::string& path);

// IEEE CRC-32 (reflected, poly 0xEDB88320), exposed for tests.
std::uint32_t crc32(const void* data, std::size_t n);

}  // namespace csem::persist

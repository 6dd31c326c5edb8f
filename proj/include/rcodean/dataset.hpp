#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcodean/ensemble.hpp"
#include "rcodean/mat.hpp"

namespace rcodean {

/// Malformed text input; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class Split { ae_train, clf_train, test };
std::string to_string(Split split);
Split split_from_string(const std::string& name);

/// Relative split sizes. The defaults mirror the 160k/20k/20k CelebA
/// protocol (autoencoders / ensemble classifier / test).
struct SplitFractions {
  double ae_train = 8.0;
  double clf_train = 1.0;
  double test = 1.0;
};

struct AttributeRecord {
  std::string image;     // file name relative to the images directory
  Bits labels;           // k entries in {0, 1}
  Split split = Split::ae_train;
  std::string identity;  // empty when unknown
};

struct AttributeDataset {
  std::vector<std::string> attribute_names;
  std::vector<AttributeRecord> records;
  std::filesystem::path images_dir;
  /// Raw 0-255 images held in memory (synthetic data); empty when images
  /// live on disk under images_dir.
  std::vector<Mat> images;

  std::size_t size() const { return records.size(); }
  std::size_t num_attributes() const { return attribute_names.size(); }

  std::vector<std::size_t> indices(Split split) const;
  /// k x indices.size() label matrix.
  Mat labels(const std::vector<std::size_t>& indices) const;
  /// Raw grayscale image of record i, from memory or disk.
  Mat image(std::size_t i) const;

  /// Label counts, in-memory image count, and identity-disjointness of the
  /// splits. Throws std::invalid_argument.
  void validate() const;
};

/// Index-based split: the first share of records goes to ae_train, the next
/// to clf_train, the rest to test. Counts are floor(n * fraction / total)
/// for the first two splits.
void assign_splits(AttributeDataset& dataset, SplitFractions fractions);

/// Identity-disjoint split: whole identities (in first-appearance order) are
/// assigned to a split until its record quota is met. Records without an
/// identity are treated as their own identity.
void assign_splits_by_identity(AttributeDataset& dataset, SplitFractions fractions);

/// Parses the CelebA list_attr layout: record count, attribute names, then
/// one line per image with k values in {-1, 1}. -1 maps to 0.
AttributeDataset parse_attr_list(std::istream& in);

AttributeDataset load_attr_list(const std::filesystem::path& path,
                                const std::filesystem::path& images_dir,
                                SplitFractions fractions = {});

/// CelebA identity file: "<image> <identity>" per line.
std::map<std::string, std::string> load_identities(const std::filesystem::path& path);
void attach_identities(AttributeDataset& dataset, const std::map<std::string, std::string>& ids);

void write_attr_list(const AttributeDataset& dataset, const std::filesystem::path& path);

}  // namespace rcodean

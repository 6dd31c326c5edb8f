#include "rcodean/dataset.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "rcodean/image_io.hpp"

namespace rcodean {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

struct SplitCounts {
  std::size_t ae;
  std::size_t clf;
};

SplitCounts split_counts(std::size_t n, SplitFractions f) {
  if (f.ae_train < 0 || f.clf_train < 0 || f.test < 0) {
    throw std::invalid_argument("split fractions must be nonnegative");
  }
  const double total = f.ae_train + f.clf_train + f.test;
  if (!(total > 0)) throw std::invalid_argument("split fractions must not all be zero");
  const auto dn = static_cast<double>(n);
  // Small epsilon so that exact ratios like 8/10 of 10 do not floor to 7.
  const auto ae = static_cast<std::size_t>(std::floor(dn * f.ae_train / total + 1e-9));
  const auto clf = static_cast<std::size_t>(std::floor(dn * f.clf_train / total + 1e-9));
  return {std::min(ae, n), std::min(clf, n - std::min(ae, n))};
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::ae_train: return "ae-train";
    case Split::clf_train: return "clf-train";
    case Split::test: return "test";
  }
  return "unknown";
}

Split split_from_string(const std::string& name) {
  if (name == "ae-train") return Split::ae_train;
  if (name == "clf-train") return Split::clf_train;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + name + "' (expected ae-train, clf-train, test)");
}

std::vector<std::size_t> AttributeDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == split) out.push_back(i);
  }
  return out;
}

Mat AttributeDataset::labels(const std::vector<std::size_t>& idx) const {
  Mat out(num_attributes(), idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const Bits& l = records.at(idx[j]).labels;
    for (std::size_t a = 0; a < l.size(); ++a) out(a, j) = l[a];
  }
  return out;
}

Mat AttributeDataset::image(std::size_t i) const {
  if (!images.empty()) return images.at(i);
  return load_gray_image(images_dir / records.at(i).image);
}

void AttributeDataset::validate() const {
  const std::size_t k = num_attributes();
  for (const AttributeRecord& r : records) {
    if (r.labels.size() != k) {
      throw std::invalid_argument("record '" + r.image + "' has " + std::to_string(r.labels.size()) +
                                  " labels, expected " + std::to_string(k));
    }
  }
  if (!images.empty() && images.size() != records.size()) {
    throw std::invalid_argument("in-memory image count does not match record count");
  }
  std::map<std::string, Split> owner;
  for (const AttributeRecord& r : records) {
    if (r.identity.empty()) continue;
    auto [it, inserted] = owner.emplace(r.identity, r.split);
    if (!inserted && it->second != r.split) {
      throw std::invalid_argument("identity '" + r.identity + "' appears in both " +
                                  to_string(it->second) + " and " + to_string(r.split));
    }
  }
}

void assign_splits(AttributeDataset& dataset, SplitFractions fractions) {
  const auto c = split_counts(dataset.size(), fractions);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    dataset.records[i].split =
        i < c.ae ? Split::ae_train : (i < c.ae + c.clf ? Split::clf_train : Split::test);
  }
}

void assign_splits_by_identity(AttributeDataset& dataset, SplitFractions fractions) {
  const auto c = split_counts(dataset.size(), fractions);
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const AttributeRecord& r = dataset.records[i];
    const std::string key = r.identity.empty() ? "#record" + std::to_string(i) : "id:" + r.identity;
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(i);
  }
  std::size_t assigned = 0;
  for (const std::string& key : order) {
    const Split s = assigned < c.ae ? Split::ae_train
                                    : (assigned < c.ae + c.clf ? Split::clf_train : Split::test);
    for (std::size_t i : groups[key]) dataset.records[i].split = s;
    assigned += groups[key].size();
  }
}

AttributeDataset parse_attr_list(std::istream& in) {
  AttributeDataset ds;
  std::string line;
  std::size_t line_no = 0;

  if (!std::getline(in, line)) throw ParseError(1, "missing record count");
  ++line_no;
  std::size_t expected = 0;
  {
    const auto toks = split_ws(strip_cr(line));
    std::size_t pos = 0;
    try {
      if (toks.size() != 1) throw std::invalid_argument("count");
      expected = std::stoul(toks[0], &pos);
      if (pos != toks[0].size()) throw std::invalid_argument("count");
    } catch (const std::exception&) {
      throw ParseError(line_no, "expected a record count");
    }
  }

  if (!std::getline(in, line)) throw ParseError(2, "missing attribute names");
  ++line_no;
  ds.attribute_names = split_ws(strip_cr(line));
  if (ds.attribute_names.empty()) throw ParseError(line_no, "no attribute names");
  const std::size_t k = ds.attribute_names.size();

  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(strip_cr(line));
    if (toks.empty()) continue;
    if (toks.size() != k + 1) {
      throw ParseError(line_no, "expected " + std::to_string(k) + " labels, found " +
                                    std::to_string(toks.size() - 1));
    }
    AttributeRecord rec;
    rec.image = toks[0];
    rec.labels.reserve(k);
    for (std::size_t a = 0; a < k; ++a) {
      const std::string& v = toks[a + 1];
      if (v == "1") {
        rec.labels.push_back(1);
      } else if (v == "-1") {
        rec.labels.push_back(0);
      } else {
        throw ParseError(line_no, "label '" + v + "' for attribute " + ds.attribute_names[a] +
                                      " is not -1 or 1");
      }
    }
    ds.records.push_back(std::move(rec));
  }
  if (ds.records.size() != expected) {
    throw ParseError(1, "header declares " + std::to_string(expected) + " records but " +
                            std::to_string(ds.records.size()) + " were found");
  }
  return ds;
}

AttributeDataset load_attr_list(const std::filesystem::path& path,
                                const std::filesystem::path& images_dir,
                                SplitFractions fractions) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset not found: " + path.string());
  AttributeDataset ds = parse_attr_list(in);
  ds.images_dir = images_dir;
  assign_splits(ds, fractions);
  ds.validate();
  return ds;
}

std::map<std::string, std::string> load_identities(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("identity file not found: " + path.string());
  std::map<std::string, std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(strip_cr(line));
    if (toks.empty()) continue;
    if (toks.size() != 2) throw ParseError(line_no, "expected '<image> <identity>'");
    ids[toks[0]] = toks[1];
  }
  return ids;
}

void attach_identities(AttributeDataset& dataset, const std::map<std::string, std::string>& ids) {
  for (AttributeRecord& r : dataset.records) {
    if (auto it = ids.find(r.image); it != ids.end()) r.identity = it->second;
  }
}

void write_attr_list(const AttributeDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << dataset.records.size() << '\n';
  for (std::size_t a = 0; a < dataset.attribute_names.size(); ++a) {
    out << (a ? " " : "") << dataset.attribute_names[a];
  }
  out << '\n';
  for (const AttributeRecord& r : dataset.records) {
    out << r.image;
    for (auto v : r.labels) out << (v ? "  1" : " -1");
    out << '\n';
  }
}

}  // namespace rcodean

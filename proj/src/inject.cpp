#include "bitloupe/inject.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bitloupe/checkpoint.hpp"

namespace bitloupe {

int msb_bit_index(Dtype d) { return d == Dtype::i8 ? 7 : 30; }

std::string SelectionPolicy::tag() const {
  std::ostringstream os;
  switch (kind) {
    case PolicyKind::TopMagnitudeMsb:
      os << "top-magnitude-msb";
      if (rank_offset > 0) {
        os << ";rank=" << rank_offset;
      }
      break;
    case PolicyKind::RandomUniform:
      os << "random-uniform;seed=" << seed
         << ";bit=" << (bit_mode == BitMode::Msb ? "msb" : "uniform");
      break;
    case PolicyKind::FixedList:
      os << "fixed-list;n=" << fixed.size();
      break;
  }
  if (block) {
    os << ";block=" << *block;
  }
  if (sublayer) {
    os << ";sublayer=" << *sublayer;
  }
  if (include_embeddings) {
    os << ";embeddings=yes";
  }
  return os.str();
}

namespace {

bool tensor_eligible(const std::string& name, const SelectionPolicy& policy) {
  int block = 0;
  std::string sublayer;
  const bool is_block_tensor = parse_block_tensor_name(name, block, sublayer);
  if (!is_block_tensor) {
    return policy.include_embeddings && !policy.block && !policy.sublayer;
  }
  if (policy.block && *policy.block != block) {
    return false;
  }
  if (policy.sublayer && *policy.sublayer != sublayer) {
    return false;
  }
  return true;
}

std::vector<std::string> eligible_tensors(const ModelState& m,
                                          const SelectionPolicy& policy) {
  std::vector<std::string> names;
  for (const auto& [name, tensor] : m.tensors) {
    (void)tensor;
    if (tensor_eligible(name, policy)) {
      names.push_back(name);
    }
  }
  if (names.empty()) {
    throw std::invalid_argument("selection policy matches no tensors");
  }
  return names;
}

void validate_address(const ModelState& m, const BitAddress& a) {
  const WeightTensor& t = m.tensor(a.tensor_name);
  if (a.element_index >= t.element_count()) {
    throw std::out_of_range("address element out of range: " + to_string(a));
  }
  if (a.bit_index < 0 || a.bit_index >= bits_per_element(t.dtype())) {
    throw std::out_of_range("address bit out of range: " + to_string(a));
  }
}

}  // namespace

std::vector<BitAddress> select_critical_bits(const ModelState& m, std::size_t k,
                                             const SelectionPolicy& policy) {
  if (k < 1) {
    throw std::invalid_argument("k must be >= 1");
  }

  if (policy.kind == PolicyKind::FixedList) {
    if (policy.fixed.size() != k) {
      throw std::invalid_argument("fixed-list policy needs exactly k addresses");
    }
    for (const auto& a : policy.fixed) {
      validate_address(m, a);
    }
    return policy.fixed;
  }

  const auto names = eligible_tensors(m, policy);

  if (policy.kind == PolicyKind::RandomUniform) {
    std::mt19937_64 rng(policy.seed);
    std::size_t total = 0;
    for (const auto& n : names) {
      total += m.tensor(n).element_count();
    }
    if (k > total) {
      throw std::invalid_argument("k exceeds eligible weight count");
    }
    std::set<BitAddress> chosen;
    std::vector<BitAddress> out;
    while (out.size() < k) {
      std::size_t flat = static_cast<std::size_t>(rng() % total);
      for (const auto& n : names) {
        const WeightTensor& t = m.tensor(n);
        if (flat < t.element_count()) {
          const int bit = policy.bit_mode == BitMode::Msb
                              ? msb_bit_index(t.dtype())
                              : static_cast<int>(
                                    rng() % static_cast<std::uint64_t>(
                                                bits_per_element(t.dtype())));
          BitAddress a{n, flat, bit};
          if (chosen.insert(a).second) {
            out.push_back(std::move(a));
          }
          break;
        }
        flat -= t.element_count();
      }
    }
    return out;
  }

  // TopMagnitudeMsb: the k largest |dequantized value| sites, MSB targeted.
  std::size_t total = 0;
  for (const auto& n : names) {
    total += m.tensor(n).element_count();
  }
  if (policy.rank_offset + k > total) {
    throw std::invalid_argument("k exceeds eligible weight count");
  }
  struct Site {
    float magnitude;
    const std::string* name;
    std::size_t element;
  };
  std::vector<Site> sites;
  sites.reserve(total);
  for (const auto& n : names) {
    const WeightTensor& t = m.tensor(n);
    for (std::size_t i = 0; i < t.element_count(); ++i) {
      sites.push_back({std::fabs(t.floats()[i]), &n, i});
    }
  }
  // Descending magnitude, ties to lowest (name, element).
  std::stable_sort(sites.begin(), sites.end(), [](const Site& a, const Site& b) {
    if (a.magnitude != b.magnitude) {
      return a.magnitude > b.magnitude;
    }
    if (*a.name != *b.name) {
      return *a.name < *b.name;
    }
    return a.element < b.element;
  });
  std::vector<BitAddress> out;
  out.reserve(k);
  for (std::size_t i = policy.rank_offset; i < policy.rank_offset + k; ++i) {
    const Site& s = sites[i];
    out.push_back({*s.name, s.element, msb_bit_index(m.tensor(*s.name).dtype())});
  }
  return out;
}

std::pair<ModelState, FaultManifest> inject(const ModelState& m,
                                            const std::vector<BitAddress>& addresses,
                                            const std::string& injected_at,
                                            const std::string& policy_tag) {
  if (addresses.empty()) {
    throw std::invalid_argument("no addresses to inject");
  }
  {
    std::set<BitAddress> uniq(addresses.begin(), addresses.end());
    if (uniq.size() != addresses.size()) {
      throw std::invalid_argument("duplicate fault addresses");
    }
  }
  for (const auto& a : addresses) {
    validate_address(m, a);
  }

  FaultManifest manifest;
  manifest.base_checkpoint_digest = checkpoint_digest_hex(m);
  manifest.selection_policy = policy_tag;

  ModelState out = m;
  for (const auto& a : addresses) {
    const WeightTensor& current = out.tensor(a.tensor_name);
    FaultRecord rec;
    rec.address = a;
    rec.original_bits = current.element_bits(a.element_index);
    rec.injected_at = injected_at;
    int block = -1;
    std::string sublayer = "embedding";
    parse_block_tensor_name(a.tensor_name, block, sublayer);
    rec.block = block;
    rec.sublayer = sublayer;
    manifest.records.push_back(std::move(rec));

    out.tensors[a.tensor_name] =
        std::make_shared<WeightTensor>(flip_bit(current, a));
  }
  manifest.faulty_checkpoint_digest = checkpoint_digest_hex(out);
  return {std::move(out), std::move(manifest)};
}

}  // namespace bitloupe

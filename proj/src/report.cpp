#include "bitloupe/report.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bitloupe {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08" PRIx32, v);
  return buf;
}

// Line-based "key: value" reader with strict ordering-free lookup.
struct Lines {
  std::vector<std::pair<std::string, std::string>> kv;

  explicit Lines(const std::string& text, const std::string& expected_header) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != expected_header) {
      throw std::runtime_error("unexpected report header: " + line);
    }
    while (std::getline(in, line)) {
      if (line.empty()) {
        continue;
      }
      const auto colon = line.find(": ");
      if (colon == std::string::npos) {
        throw std::runtime_error("malformed report line: " + line);
      }
      kv.emplace_back(line.substr(0, colon), line.substr(colon + 2));
    }
  }

  const std::string& one(const std::string& key) const {
    const std::string* found = nullptr;
    for (const auto& [k, v] : kv) {
      if (k == key) {
        if (found) {
          throw std::runtime_error("duplicate report key: " + key);
        }
        found = &v;
      }
    }
    if (!found) {
      throw std::runtime_error("missing report key: " + key);
    }
    return *found;
  }

  std::vector<std::string> all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : kv) {
      if (k == key) {
        out.push_back(v);
      }
    }
    return out;
  }

  bool has(const std::string& key) const {
    for (const auto& [k, v] : kv) {
      (void)v;
      if (k == key) {
        return true;
      }
    }
    return false;
  }
};

std::vector<double> parse_doubles(const std::string& s) {
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    out.push_back(std::stod(tok));  // stod accepts inf/nan spellings
  }
  return out;
}

}  // namespace

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  f << text;
  if (!f) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    throw std::runtime_error("cannot open: " + path.string());
  }
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// Sensitivity ------------------------------------------------------------

std::string format_sensitivity(const SensitivityReport& r) {
  std::ostringstream os;
  os << "bitloupe-sensitivity v1\n";
  os << "checkpoint: " << r.checkpoint_digest << "\n";
  os << "inputs: " << r.input_set_id << "\n";
  std::string alphas;
  for (double a : r.alphas) {
    alphas += (alphas.empty() ? "" : " ") + fmt_double(a);
  }
  os << "alphas: " << alphas << "\n";
  os << "base_loss: " << fmt_double(r.base_loss) << "\n";
  for (std::size_t b = 0; b < r.delta_loss.size(); ++b) {
    std::string row;
    for (double d : r.delta_loss[b]) {
      row += (row.empty() ? "" : " ") + fmt_double(d);
    }
    os << "delta_loss " << b << ": " << row << "\n";
  }
  for (std::size_t b = 0; b < r.bss.size(); ++b) {
    os << "bss " << b << ": " << fmt_double(r.bss[b]) << "\n";
  }
  os << "suspected_block: " << r.suspected_block << "\n";
  os << "bss_max_over_median: " << fmt_double(r.bss_max_over_median) << "\n";
  os << "forward_passes: " << r.forward_passes << "\n";
  return os.str();
}

SensitivityReport parse_sensitivity(const std::string& text) {
  Lines lines(text, "bitloupe-sensitivity v1");
  SensitivityReport r;
  r.checkpoint_digest = lines.one("checkpoint");
  r.input_set_id = lines.one("inputs");
  r.alphas = parse_doubles(lines.one("alphas"));
  r.base_loss = std::stod(lines.one("base_loss"));
  for (std::size_t b = 0;; ++b) {
    const std::string key = "delta_loss " + std::to_string(b);
    if (!lines.has(key)) {
      break;
    }
    r.delta_loss.push_back(parse_doubles(lines.one(key)));
  }
  for (std::size_t b = 0;; ++b) {
    const std::string key = "bss " + std::to_string(b);
    if (!lines.has(key)) {
      break;
    }
    r.bss.push_back(std::stod(lines.one(key)));
  }
  r.suspected_block = std::stoi(lines.one("suspected_block"));
  r.bss_max_over_median = std::stod(lines.one("bss_max_over_median"));
  r.forward_passes = std::stoull(lines.one("forward_passes"));
  return r;
}

// Differential localization ----------------------------------------------

std::string format_diffloc(const LocalizationResult& r) {
  std::ostringstream os;
  os << "bitloupe-diffloc v1\n";
  os << "clean: " << r.clean_digest << "\n";
  os << "faulty: " << r.faulty_digest << "\n";
  os << "inputs: " << r.input_set_id << "\n";
  os << "metric: " << div_metric_name(r.metric) << "\n";
  os << "pick: " << block_pick_name(r.pick) << "\n";
  os << "aggregation: " << r.aggregation << "\n";
  os << "status: " << (r.fault_found ? "fault-localized" : "no-fault") << "\n";
  if (r.fault_found) {
    os << "block: " << r.block << "\n";
    std::string blocks;
    for (int b : r.blocks) {
      blocks += (blocks.empty() ? "" : " ") + std::to_string(b);
    }
    os << "blocks: " << blocks << "\n";
    os << "sublayer: " << (r.sublayer.empty() ? "-" : r.sublayer) << "\n";
    os << "similarity_attn: " << fmt_double(r.attn_similarity) << "\n";
    os << "similarity_mlp: " << fmt_double(r.mlp_similarity) << "\n";
    os << "block_params_match: " << (r.block_params_match ? "yes" : "no") << "\n";
  }
  for (std::size_t b = 0; b < r.profile.per_block.size(); ++b) {
    os << "divergence " << b << ": "
       << fmt_double(r.profile.per_block[b].cosine) << " "
       << fmt_double(r.profile.per_block[b].l2) << "\n";
  }
  for (const auto& name : r.digest_mismatches) {
    os << "digest_mismatch: " << name << "\n";
  }
  for (const auto& f : r.findings) {
    os << "finding: " << f.tensor << " " << f.element << " ";
    for (std::size_t i = 0; i < f.bits.size(); ++i) {
      os << (i ? "," : "") << f.bits[i];
    }
    os << " " << fmt_hex32(f.clean_bits) << " " << fmt_hex32(f.faulty_bits)
       << "\n";
  }
  os << "cost: hidden=" << r.cost.hidden_state_comparisons
     << " activation=" << r.cost.activation_comparisons
     << " hash=" << r.cost.hash_computations
     << " element=" << r.cost.element_comparisons
     << " total=" << r.cost.total() << "\n";
  os << "forward_passes: " << r.forward_passes << "\n";
  return os.str();
}

LocalizationResult parse_diffloc(const std::string& text) {
  Lines lines(text, "bitloupe-diffloc v1");
  LocalizationResult r;
  r.clean_digest = lines.one("clean");
  r.faulty_digest = lines.one("faulty");
  r.input_set_id = lines.one("inputs");
  r.metric = parse_div_metric(lines.one("metric"));
  r.pick = lines.one("pick") == "onset" ? BlockPick::Onset : BlockPick::MaxDeviation;
  r.aggregation = lines.one("aggregation");
  r.fault_found = lines.one("status") == "fault-localized";
  if (r.fault_found) {
    r.block = std::stoi(lines.one("block"));
    for (double b : parse_doubles(lines.one("blocks"))) {
      r.blocks.push_back(static_cast<int>(b));
    }
    r.sublayer = lines.one("sublayer");
    if (r.sublayer == "-") {
      r.sublayer.clear();
    }
    r.attn_similarity = std::stod(lines.one("similarity_attn"));
    r.mlp_similarity = std::stod(lines.one("similarity_mlp"));
    r.block_params_match = lines.one("block_params_match") == "yes";
  }
  r.profile.metric = r.metric;
  r.profile.aggregation = r.aggregation;
  for (std::size_t b = 0;; ++b) {
    const std::string key = "divergence " + std::to_string(b);
    if (!lines.has(key)) {
      break;
    }
    const auto vals = parse_doubles(lines.one(key));
    if (vals.size() != 2) {
      throw std::runtime_error("malformed divergence line");
    }
    r.profile.per_block.push_back({vals[0], vals[1]});
  }
  for (const auto& name : lines.all("digest_mismatch")) {
    r.digest_mismatches.push_back(name);
  }
  for (const auto& body : lines.all("finding")) {
    std::istringstream in(body);
    BitFinding f;
    std::string bits;
    std::string cb, fb;
    in >> f.tensor >> f.element >> bits >> cb >> fb;
    if (!in) {
      throw std::runtime_error("malformed finding line: " + body);
    }
    std::istringstream bs(bits);
    std::string tok;
    while (std::getline(bs, tok, ',')) {
      f.bits.push_back(std::stoi(tok));
    }
    f.clean_bits = static_cast<std::uint32_t>(std::stoul(cb, nullptr, 16));
    f.faulty_bits = static_cast<std::uint32_t>(std::stoul(fb, nullptr, 16));
    r.findings.push_back(std::move(f));
  }
  {
    std::istringstream in(lines.one("cost"));
    std::string field;
    while (in >> field) {
      const auto eq = field.find('=');
      const std::string key = field.substr(0, eq);
      const std::uint64_t value = std::stoull(field.substr(eq + 1));
      if (key == "hidden") r.cost.hidden_state_comparisons = value;
      if (key == "activation") r.cost.activation_comparisons = value;
      if (key == "hash") r.cost.hash_computations = value;
      if (key == "element") r.cost.element_comparisons = value;
    }
  }
  r.forward_passes = std::stoull(lines.one("forward_passes"));
  return r;
}

// Fault manifest -----------------------------------------------------------

std::string format_manifest(const FaultManifest& m) {
  std::ostringstream os;
  os << "bitloupe-manifest v1\n";
  os << "base_checkpoint: " << m.base_checkpoint_digest << "\n";
  os << "faulty_checkpoint: " << m.faulty_checkpoint_digest << "\n";
  os << "policy: " << (m.selection_policy.empty() ? "-" : m.selection_policy)
     << "\n";
  for (const auto& rec : m.records) {
    os << "record: " << rec.address.tensor_name << " "
       << rec.address.element_index << " " << rec.address.bit_index << " "
       << rec.block << " " << rec.sublayer << " "
       << fmt_hex32(rec.original_bits) << " "
       << (rec.injected_at.empty() ? "-" : rec.injected_at) << "\n";
  }
  return os.str();
}

FaultManifest parse_manifest(const std::string& text) {
  Lines lines(text, "bitloupe-manifest v1");
  FaultManifest m;
  m.base_checkpoint_digest = lines.one("base_checkpoint");
  m.faulty_checkpoint_digest = lines.one("faulty_checkpoint");
  m.selection_policy = lines.one("policy");
  if (m.selection_policy == "-") {
    m.selection_policy.clear();
  }
  for (const auto& body : lines.all("record")) {
    std::istringstream in(body);
    FaultRecord rec;
    std::string orig;
    in >> rec.address.tensor_name >> rec.address.element_index >>
        rec.address.bit_index >> rec.block >> rec.sublayer >> orig >>
        rec.injected_at;
    if (!in) {
      throw std::runtime_error("malformed manifest record: " + body);
    }
    rec.original_bits = static_cast<std::uint32_t>(std::stoul(orig, nullptr, 16));
    if (rec.injected_at == "-") {
      rec.injected_at.clear();
    }
    m.records.push_back(std::move(rec));
  }
  if (m.records.empty()) {
    throw std::runtime_error("manifest has no records");
  }
  return m;
}

// Evaluation ---------------------------------------------------------------

std::string format_eval(const EvalReport& r) {
  std::ostringstream os;
  os << "bitloupe-eval v1\n";
  os << "checkpoint: " << r.checkpoint_digest << "\n";
  os << "inputs: " << r.input_set_id << "\n";
  os << "loss: " << fmt_double(r.loss) << "\n";
  os << "accuracy: " << fmt_double(r.accuracy) << "\n";
  for (const auto& rec : r.recoveries) {
    os << "recovery: mode=" << recovery_mode_name(rec.mode)
       << " direction=" << metric_direction_name(rec.direction)
       << " baseline=" << fmt_double(rec.baseline_metric)
       << " corrupted=" << fmt_double(rec.corrupted_metric)
       << " recovered=" << fmt_double(rec.recovered_metric)
       << " percentage=" << fmt_double(rec.recovery_percentage) << "\n";
  }
  return os.str();
}

// Plot data ----------------------------------------------------------------

void emit_sensitivity_plots(const SensitivityReport& r,
                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ostringstream os;
    os << "block";
    for (double a : r.alphas) {
      os << "\t" << fmt_double(a);
    }
    os << "\n";
    for (std::size_t b = 0; b < r.delta_loss.size(); ++b) {
      os << b;
      for (double d : r.delta_loss[b]) {
        os << "\t" << fmt_double(d);
      }
      os << "\n";
    }
    write_text_file(dir / "delta_loss_heatmap.tsv", os.str());
  }
  {
    std::ostringstream os;
    os << "block\tbss\n";
    for (std::size_t b = 0; b < r.bss.size(); ++b) {
      os << b << "\t" << fmt_double(r.bss[b]) << "\n";
    }
    write_text_file(dir / "bss_bars.tsv", os.str());
  }
}

void emit_diffloc_plots(const LocalizationResult& r,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream os;
  os << "block\tcosine\tl2\n";
  for (std::size_t b = 0; b < r.profile.per_block.size(); ++b) {
    os << b << "\t" << fmt_double(r.profile.per_block[b].cosine) << "\t"
       << fmt_double(r.profile.per_block[b].l2) << "\n";
  }
  write_text_file(dir / "block_divergence.tsv", os.str());
}

void emit_alpha_sweep_plot(const std::vector<std::pair<double, double>>& curve,
                           const std::filesystem::path& path) {
  std::ostringstream os;
  os << "alpha\tdelta_loss\n";
  for (const auto& [a, d] : curve) {
    os << fmt_double(a) << "\t" << fmt_double(d) << "\n";
  }
  write_text_file(path, os.str());
}

void dump_hidden_states(const ForwardTrace& trace,
                        const std::filesystem::path& dir) {
  if (trace.hidden.empty()) {
    throw std::invalid_argument("trace has no captured hidden states");
  }
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < trace.hidden.size(); ++i) {
    const Matrix& h = trace.hidden[i];
    std::ostringstream os;
    for (int t = 0; t < h.rows; ++t) {
      for (int c = 0; c < h.cols; ++c) {
        os << (c ? "\t" : "") << fmt_double(h.at(t, c));
      }
      os << "\n";
    }
    write_text_file(dir / ("hidden_" + std::to_string(i) + ".tsv"), os.str());
  }
}

}  // namespace bitloupe

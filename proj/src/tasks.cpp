#include "bitloupe/tasks.hpp"

#include <random>
#include <sstream>
#include <stdexcept>

namespace bitloupe {

const char* task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::Copy:
      return "copy";
    case TaskKind::Reversal:
      return "reversal";
    case TaskKind::ModAdd:
      return "modadd";
  }
  throw std::logic_error("bad task kind");
}

TaskKind parse_task_kind(const std::string& s) {
  if (s == "copy") return TaskKind::Copy;
  if (s == "reversal") return TaskKind::Reversal;
  if (s == "modadd") return TaskKind::ModAdd;
  throw std::invalid_argument("unknown task kind: " + s);
}

std::string TaskSpec::id() const {
  std::ostringstream os;
  os << "task=" << task_kind_name(kind) << ";seed=" << seed
     << ";count=" << count << ";length=" << length;
  return os.str();
}

TaskSpec parse_task_spec(const std::string& id) {
  TaskSpec spec;
  std::stringstream ss(id);
  std::string field;
  while (std::getline(ss, field, ';')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("bad task spec field: " + field);
    }
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "task") {
      spec.kind = parse_task_kind(value);
    } else if (key == "seed") {
      spec.seed = std::stoull(value);
    } else if (key == "count") {
      spec.count = std::stoi(value);
    } else if (key == "length") {
      spec.length = std::stoi(value);
    } else {
      throw std::invalid_argument("unknown task spec key: " + key);
    }
  }
  return spec;
}

SyntheticTaskSet generate_tasks(const TaskSpec& spec, int vocab) {
  if (spec.count < 1 || spec.length < 1) {
    throw std::invalid_argument("task spec needs count >= 1 and length >= 1");
  }
  if (vocab < 2) {
    throw std::invalid_argument("vocab must be >= 2");
  }
  std::mt19937_64 rng(spec.seed);
  SyntheticTaskSet set;
  set.spec = spec;
  set.vocab = vocab;
  set.items.resize(static_cast<std::size_t>(spec.count));
  for (auto& item : set.items) {
    item.tokens.resize(static_cast<std::size_t>(spec.length));
    for (int& t : item.tokens) {
      t = static_cast<int>(rng() % static_cast<std::uint64_t>(vocab));
    }
    item.targets.resize(item.tokens.size());
    const int T = spec.length;
    for (int t = 0; t < T; ++t) {
      switch (spec.kind) {
        case TaskKind::Copy:
          item.targets[t] = t == 0 ? item.tokens[0] : item.tokens[t - 1];
          break;
        case TaskKind::Reversal:
          item.targets[t] = item.tokens[static_cast<std::size_t>(T - 1 - t)];
          break;
        case TaskKind::ModAdd:
          item.targets[t] =
              t == 0 ? item.tokens[0]
                     : (item.tokens[t] + item.tokens[t - 1]) % vocab;
          break;
      }
    }
  }
  return set;
}

}  // namespace bitloupe

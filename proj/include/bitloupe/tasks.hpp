#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bitloupe {

// Deterministic rule families for the synthetic evaluation task. Targets are
// teacher-forced: target[t] is the token the model should predict at
// position t.
//
//   copy     target[t] = tokens[t-1]          (target[0] = tokens[0])
//   reversal target[t] = tokens[T-1-t]        (predictable once t >= T/2)
//   modadd   target[t] = (tokens[t] + tokens[t-1]) mod vocab
enum class TaskKind { Copy, Reversal, ModAdd };

const char* task_kind_name(TaskKind k);
TaskKind parse_task_kind(const std::string& s);

struct TaskSpec {
  TaskKind kind = TaskKind::Copy;
  std::uint64_t seed = 0;
  int count = 64;
  int length = 32;

  std::string id() const;  // stable identifier, e.g. "task=copy;seed=17;count=64;length=32"
  bool operator==(const TaskSpec&) const = default;
};

TaskSpec parse_task_spec(const std::string& id);

struct TaskItem {
  std::vector<int> tokens;
  std::vector<int> targets;
};

struct SyntheticTaskSet {
  TaskSpec spec;
  int vocab = 0;
  std::vector<TaskItem> items;

  std::string id() const { return spec.id(); }
};

// Bitwise-reproducible from (spec, vocab); targets always in-vocabulary.
SyntheticTaskSet generate_tasks(const TaskSpec& spec, int vocab);

}  // namespace bitloupe

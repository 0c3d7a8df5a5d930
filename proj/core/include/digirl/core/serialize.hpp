#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "digirl/core/types.hpp"

namespace digirl::core {

// JSON text for the domain types. One trajectory per line in JSONL files.

std::string to_json(const Action& a);
std::string to_json(const Task& t);
std::string to_json(const Trajectory& t);

Action action_from_json(const std::string& text);
Task task_from_json(const std::string& text);
Trajectory trajectory_from_json(const std::string& text);

void write_jsonl(std::ostream& os, const std::vector<Trajectory>& ts);
std::vector<Trajectory> read_jsonl(std::istream& is);

void save_jsonl(const std::filesystem::path& path, const std::vector<Trajectory>& ts);
std::vector<Trajectory> load_jsonl(const std::filesystem::path& path);

std::string tasks_to_json(const std::vector<Task>& tasks);
std::vector<Task> tasks_from_json(const std::string& text);

}  // namespace digirl::core

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "t2t/data.hpp"
#include "t2t/tensor.hpp"

namespace t2t::test {

inline Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(r * c);
  for (auto& x : v) x = u(rng);
  return Tensor::from(r, c, std::move(v));
}

inline std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("t2t_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// One game: home players x {PTS, AST, REB}, one visiting player, teams.
inline std::string game_json(const std::string& id, const std::string& date,
                             const std::string& home_pts = "18") {
  return R"({"game_id": ")" + id + R"(", "date": ")" + date + R"(",
    "home_players": {"AlJefferson": {"PTS": ")" + home_pts + R"(", "AST": "3", "REB": "9"}},
    "vis_players": {"KembaWalker": {"PTS": "22", "AST": "7", "REB": "4"}},
    "teams": {"Hornets": {"PTS": "98", "AST": "20", "REB": "40"}},
    "summary": ["AlJefferson", "scored", ")" + home_pts + R"(", "points", "."]})";
}

}  // namespace t2t::test

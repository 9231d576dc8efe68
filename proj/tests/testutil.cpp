#include "testutil.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace linguist::testutil {

void write_snips_fixture(const std::string& path, std::size_t n_rows) {
  const std::vector<std::string> songs = {"midnight sun",  "river stone", "old lighthouse",
                                          "paper planes",  "quiet storm", "neon skyline"};
  const std::vector<std::string> playlists = {"morning mix", "road trip", "focus hour",
                                              "late night"};
  const std::vector<std::string> artists = {"nova quartet", "silver echo", "red harbor"};
  const std::vector<std::string> items = {"song", "track", "album", "tune"};

  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < n_rows; ++i) {
    nlohmann::ordered_json data = nlohmann::ordered_json::array();
    const std::string suffix = " " + std::to_string(i);
    switch (i % 3) {
      case 0:
        data.push_back({{"text", "add "}});
        data.push_back({{"text", songs[i % songs.size()] + suffix},
                        {"entity", "entity_name"}});
        data.push_back({{"text", " to my "}});
        data.push_back({{"text", playlists[i % playlists.size()]},
                        {"entity", "playlist_name"}});
        data.push_back({{"text", " playlist"}});
        break;
      case 1:
        data.push_back({{"text", "put this "}});
        data.push_back({{"text", items[i % items.size()]}, {"entity", "music_item"}});
        data.push_back({{"text", " by "}});
        data.push_back({{"text", artists[i % artists.size()] + suffix},
                        {"entity", "artist"}});
        data.push_back({{"text", " onto "}});
        data.push_back({{"text", playlists[(i + 1) % playlists.size()]},
                        {"entity", "playlist_name"}});
        break;
      default:
        data.push_back({{"text", "add the "}});
        data.push_back({{"text", items[(i + 2) % items.size()]}, {"entity", "music_item"}});
        data.push_back({{"text", suffix + " to "}});
        data.push_back({{"text", playlists[(i + 2) % playlists.size()]},
                        {"entity", "playlist_name"}});
        break;
    }
    entries.push_back({{"data", data}});
  }
  nlohmann::ordered_json doc;
  doc["AddToPlaylist"] = entries;
  std::ofstream out(path);
  out << doc.dump();
}

std::string temp_dir(const std::string& hint) {
  static std::size_t counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("linguist_test_" + hint + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace linguist::testutil

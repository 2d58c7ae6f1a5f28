#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace djcm::csv {

// Shortest round-trip decimal form ('.' separator, locale independent).
std::string format(double v);

class Writer {
  public:
    explicit Writer(std::initializer_list<std::string_view> header);
    explicit Writer(const std::vector<std::string>& header);

    Writer& cell(std::string_view text);
    Writer& cell(double v);
    Writer& cell(long long v);
    Writer& cell(int v) { return cell(static_cast<long long>(v)); }
    Writer& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
    void end_row();

    const std::string& str() const { return text_; }

  private:
    std::size_t columns_ = 0;
    std::size_t filled_ = 0;
    std::string text_;
};

// Writes to a temporary sibling and renames, so readers never see a partial file.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::vector<std::vector<std::string>> parse(std::string_view text);

}  // namespace djcm::csv

#include "djcm/csv.hpp"

#include <charconv>
#include <fstream>

#include "djcm/error.hpp"

namespace djcm::csv {

std::string format(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

Writer::Writer(std::initializer_list<std::string_view> header) : columns_(header.size()) {
    for (auto h : header) cell(h);
    end_row();
}

Writer::Writer(const std::vector<std::string>& header) : columns_(header.size()) {
    for (const auto& h : header) cell(h);
    end_row();
}

Writer& Writer::cell(std::string_view text) {
    if (filled_ > 0) text_.push_back(',');
    text_.append(text);
    ++filled_;
    return *this;
}

Writer& Writer::cell(double v) { return cell(format(v)); }

Writer& Writer::cell(long long v) { return cell(std::to_string(v)); }

void Writer::end_row() {
    if (filled_ != columns_) {
        throw Error(ErrorKind::Shape, "csv row has " + std::to_string(filled_) + " cells, header has " +
                                          std::to_string(columns_));
    }
    text_.push_back('\n');
    filled_ = 0;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::vector<std::string>> parse(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        std::vector<std::string> row;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            row.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(row));
        pos = eol + 1;
    }
    return rows;
}

}  // namespace djcm::csv

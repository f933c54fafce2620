#include "isfno/checkpoint.hpp"

#include "binary_io.hpp"
#include "isfno/errors.hpp"

#include <fstream>

namespace isfno {

namespace {

constexpr std::uint32_t format_version = 1;

std::ifstream open_input(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw IoError("cannot open " + path.string());
  return is;
}

nlohmann::json read_spec_json(std::istream &is) {
  detail::expect_magic(is, "ISFM");
  const auto version = detail::read_pod<std::uint32_t>(is, "version");
  if (version != format_version)
    throw FormatError("unsupported ISFM version " + std::to_string(version));
  const auto len = detail::read_pod<std::uint32_t>(is, "spec length");
  try {
    return nlohmann::json::parse(detail::read_string(is, len, "spec"));
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("corrupt ISFM spec: ") + e.what());
  }
}

void read_parameters(std::istream &is, Model &model) {
  const auto count = detail::read_pod<std::uint32_t>(is, "parameter count");
  if (count != model.parameters().size())
    throw FormatError("checkpoint holds " + std::to_string(count) + " parameters, spec needs " +
                      std::to_string(model.parameters().size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = detail::read_pod<std::uint32_t>(is, "name length");
    const std::string name = detail::read_string(is, len, "name");
    if (!model.has(name))
      throw FormatError("checkpoint parameter '" + name + "' is not part of the spec");
    const auto rank = detail::read_pod<std::uint32_t>(is, "rank");
    Shape shape;
    for (std::uint32_t a = 0; a < rank; ++a)
      shape.push_back(static_cast<std::size_t>(detail::read_pod<std::uint64_t>(is, "extent")));
    Tensor &dst = model.at(name);
    if (shape != dst.shape())
      throw FormatError("parameter '" + name + "' has shape " + shape_string(shape) +
                        ", expected " + shape_string(dst.shape()));
    detail::read_doubles(is, dst.data(), dst.size(), "parameter data");
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes after ISFM payload");
}

} // namespace

void save_checkpoint(const Model &model, const std::filesystem::path &path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os)
    throw IoError("cannot open " + path.string() + " for writing");
  const std::string text = to_json(model.spec()).dump();
  os.write("ISFM", 4);
  detail::write_pod<std::uint32_t>(os, format_version);
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto &p : model.parameters()) {
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t e : p.value.shape())
      detail::write_pod<std::uint64_t>(os, e);
    detail::write_doubles(os, p.value.data(), p.value.size());
  }
  if (!os)
    throw IoError("write failed for " + path.string());
}

Model load_checkpoint(const std::filesystem::path &path) {
  auto is = open_input(path);
  Model model(model_spec_from_json(read_spec_json(is)));
  read_parameters(is, model);
  return model;
}

void load_parameters(Model &model, const std::filesystem::path &path) {
  auto is = open_input(path);
  const nlohmann::json stored = read_spec_json(is);
  if (stored != to_json(model.spec()))
    throw FormatError("checkpoint spec " + stored.dump() + " does not match the model");
  read_parameters(is, model);
}

nlohmann::json read_checkpoint_header(const std::filesystem::path &path) {
  auto is = open_input(path);
  return read_spec_json(is);
}

} // namespace isfno

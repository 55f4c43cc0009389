#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "simgen/families.hpp"

namespace simgen::families {

std::string image_id(const GeneratorSpec& spec) {
  return sha256_hex(spec_to_json(spec)).substr(0, 16);
}

Manifest build_gallery(const GalleryOptions& opt) {
  std::vector<std::string> names = opt.families;
  if (names.empty())
    for (const auto& f : registry()) names.push_back(f.name);

  std::vector<GeneratorSpec> specs;
  for (const auto& name : names) {
    const Family& fam = find_family(name);
    const ParamMap params = resolve_params(fam, {});
    for (std::size_t i = 0; i < opt.per_family; ++i) specs.push_back({name, params, opt.seed + i});
  }

  const std::filesystem::path img_dir = opt.out_dir / "images";
  std::error_code ec;
  std::filesystem::create_directories(img_dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + img_dir.string() + ": " + ec.message());
  {
    const auto probe = opt.out_dir / ".write_probe";
    std::ofstream f(probe);
    if (!f) throw Error(Errc::Io, "directory " + opt.out_dir.string() + " is not writable");
    f.close();
    std::filesystem::remove(probe, ec);
  }

  Manifest m;
  m.images.resize(specs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < specs.size(); i = next.fetch_add(1)) {
      try {
        const GeneratorSpec& s = specs[i];
        const RasterImage img = generate(s, opt.width, opt.height);
        const auto png = encode_png(img);
        ManifestEntry e;
        e.id = image_id(s);
        e.family = s.family;
        e.seed = s.seed;
        e.params = s.params;
        e.path = "images/" + e.id + ".png";
        e.sha256 = sha256_hex(png);
        write_file(opt.out_dir / e.path, png);
        m.images[i] = std::move(e);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t n_threads = std::min(specs.size(), opt.threads ? opt.threads : hw);
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < n_threads; ++k) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);

  write_text(opt.out_dir / "manifest.json", manifest_to_json(m));
  return m;
}

}  // namespace simgen::families

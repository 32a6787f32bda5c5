use myovox_core::render::Image;

/// Binary PPM. Transparent pixels show the RGB they carry.
pub fn encode_ppm(img: &Image) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.reserve((img.width * img.height * 3) as usize);
    for px in img.rgba.chunks_exact(4) {
        out.extend_from_slice(&px[..3]);
    }
    out
}

pub fn encode_png(img: &Image) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width, img.height);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("in-memory PNG header");
        w.write_image_data(&img.rgba).expect("buffer matches the image size");
    }
    out
}

use crate::error::{Error, Result};
use crate::math::{abs, Vec3};

/// Pinhole camera. Pixel `(x, y)` has its center at `(x + 0.5, y + 0.5)`,
/// with `y` growing downward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub eye: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    /// Degrees.
    pub vertical_fov: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        let f = (self.look_at - self.eye).normalized();
        let Some(f) = f else {
            return Err(Error::InvalidInput("camera eye and look_at coincide".into()));
        };
        let Some(up) = self.up.normalized() else {
            return Err(Error::InvalidInput("camera up vector is zero".into()));
        };
        if abs(f.dot(up)) > 1.0 - 1e-9 {
            return Err(Error::InvalidInput("camera up is parallel to the view direction".into()));
        }
        if !(self.vertical_fov > 0.0 && self.vertical_fov < 180.0) {
            return Err(Error::InvalidInput(alloc::format!("fov {} outside (0, 180)", self.vertical_fov)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidInput("image size must be positive".into()));
        }
        if !(self.eye.is_finite() && self.look_at.is_finite() && self.up.is_finite()) {
            return Err(Error::InvalidInput("camera has non-finite coordinates".into()));
        }
        Ok(())
    }

    pub fn forward(&self) -> Vec3 {
        (self.look_at - self.eye).normalized().unwrap_or(-Vec3::Z)
    }

    /// Right and up unit vectors of the image plane.
    pub fn basis(&self) -> (Vec3, Vec3) {
        let f = self.forward();
        let right = f.cross(self.up).normalized().unwrap_or_else(|| f.any_orthogonal());
        (right, right.cross(f))
    }

    fn half_height(&self) -> f64 {
        let half = self.vertical_fov.to_radians() * 0.5;
        crate::math::sin(half) / crate::math::cos(half)
    }

    /// Ray through the continuous pixel position `(px, py)`.
    pub fn ray(&self, px: f64, py: f64) -> (Vec3, Vec3) {
        let (right, up) = self.basis();
        let h = self.half_height();
        let w = h * self.width as f64 / self.height as f64;
        let sx = (2.0 * px / self.width as f64 - 1.0) * w;
        let sy = (1.0 - 2.0 * py / self.height as f64) * h;
        let d = (self.forward() + right * sx + up * sy).normalized().unwrap_or(self.forward());
        (self.eye, d)
    }

    /// Ray through the center of pixel `(x, y)`.
    pub fn pixel_ray(&self, x: u32, y: u32) -> (Vec3, Vec3) {
        self.ray(x as f64 + 0.5, y as f64 + 0.5)
    }

    /// Continuous pixel position of a point in front of the camera.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let (right, up) = self.basis();
        let rel = p - self.eye;
        let z = rel.dot(self.forward());
        if z <= 0.0 {
            return None;
        }
        let h = self.half_height();
        let w = h * self.width as f64 / self.height as f64;
        let sx = rel.dot(right) / z / w;
        let sy = rel.dot(up) / z / h;
        Some(((sx + 1.0) * 0.5 * self.width as f64, (1.0 - sy) * 0.5 * self.height as f64))
    }

    /// Same view at a different resolution.
    pub fn with_size(&self, width: u32, height: u32) -> Camera {
        Camera { width, height, ..*self }
    }
}

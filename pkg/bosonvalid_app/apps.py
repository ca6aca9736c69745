from django.apps import AppConfig


class BosonvalidAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'bosonvalid_app'
    verbose_name = 'Валидация бозонного сэмплинга'
